#include "vpclab/maze.hpp"

#include <charconv>
#include <deque>
#include <fstream>
#include <optional>
#include <sstream>

namespace vpclab::env {

Pos moved(Pos p, Action a)
{
    switch (a) {
    case Action::Up: return {p.row - 1, p.col};
    case Action::Right: return {p.row, p.col + 1};
    case Action::Down: return {p.row + 1, p.col};
    case Action::Left: return {p.row, p.col - 1};
    }
    throw ContractError("unknown action");
}

std::string_view action_name(Action a)
{
    static constexpr std::array<std::string_view, 4> names{"up", "right", "down", "left"};
    return names.at(static_cast<std::size_t>(a));
}

namespace {

// Distances from start, -1 where unreachable.
std::vector<int> bfs(const Maze& m, Pos from)
{
    std::vector<int> dist(static_cast<std::size_t>(m.rows() * m.cols()), -1);
    auto idx = [&](Pos p) { return static_cast<std::size_t>(p.row * m.cols() + p.col); };
    std::deque<Pos> queue{from};
    dist[idx(from)] = 0;
    while (!queue.empty()) {
        const Pos p = queue.front();
        queue.pop_front();
        for (int a = 0; a < kNumActions; ++a) {
            const Pos n = moved(p, static_cast<Action>(a));
            if (m.is_wall(n) || dist[idx(n)] >= 0)
                continue;
            dist[idx(n)] = dist[idx(p)] + 1;
            queue.push_back(n);
        }
    }
    return dist;
}

std::string pos_str(Pos p)
{
    return "(" + std::to_string(p.row) + ", " + std::to_string(p.col) + ")";
}

} // namespace

Maze::Maze(std::string name, int rows, int cols, std::vector<std::uint8_t> walls, Pos start,
           Pos goal, int max_steps)
    : name_(std::move(name)), rows_(rows), cols_(cols), walls_(std::move(walls)), start_(start),
      goal_(goal), max_steps_(max_steps)
{
    if (rows_ <= 0 || cols_ <= 0 || walls_.size() != static_cast<std::size_t>(rows_ * cols_))
        throw ValidationError("maze: grid is empty or not rectangular");
    if (max_steps_ <= 0)
        throw ValidationError("maze: max_steps must be positive");
    if (is_wall(start_))
        throw ValidationError("maze: start " + pos_str(start_) + " is not a free cell");
    if (is_wall(goal_))
        throw ValidationError("maze: goal " + pos_str(goal_) + " is not a free cell");
    if (start_ == goal_)
        throw ValidationError("maze: start and goal coincide");
    if (bfs(*this, start_)[static_cast<std::size_t>(goal_.row * cols_ + goal_.col)] < 0)
        throw ValidationError("maze '" + name_ + "': goal " + pos_str(goal_)
                              + " is unreachable from start " + pos_str(start_));
}

bool Maze::is_wall(Pos p) const
{
    if (!in_bounds(p))
        return true;
    return walls_[static_cast<std::size_t>(p.row * cols_ + p.col)] != 0;
}

std::vector<Pos> Maze::free_cells() const
{
    std::vector<Pos> out;
    for (int r = 0; r < rows_; ++r)
        for (int c = 0; c < cols_; ++c)
            if (!is_wall({r, c}))
                out.push_back({r, c});
    return out;
}

Maze parse_maze(std::string_view text)
{
    std::string name = "maze";
    int max_steps = kDefaultMaxSteps;
    std::vector<std::string> rows;

    std::istringstream in{std::string(text)};
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.empty())
            continue;
        if (const auto eq = line.find('='); eq != std::string::npos) {
            if (!rows.empty())
                throw FormatError("maze: header line " + std::to_string(lineno) + " after grid rows");
            const std::string key = line.substr(0, eq);
            const std::string value = line.substr(eq + 1);
            if (key == "name") {
                name = value;
            } else if (key == "max_steps") {
                auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), max_steps);
                if (ec != std::errc{} || ptr != value.data() + value.size())
                    throw FormatError("maze: bad max_steps '" + value + "'");
            } else {
                throw FormatError("maze: unknown header key '" + key + "'");
            }
            continue;
        }
        rows.push_back(line);
    }
    if (rows.empty())
        throw FormatError("maze: no grid rows");

    const int n_rows = static_cast<int>(rows.size());
    const int n_cols = static_cast<int>(rows[0].size());
    std::vector<std::uint8_t> walls;
    walls.reserve(static_cast<std::size_t>(n_rows * n_cols));
    std::optional<Pos> start, goal;
    for (int r = 0; r < n_rows; ++r) {
        if (static_cast<int>(rows[r].size()) != n_cols)
            throw FormatError("maze: row " + std::to_string(r) + " has " + std::to_string(rows[r].size())
                              + " cells, expected " + std::to_string(n_cols));
        for (int c = 0; c < n_cols; ++c) {
            const char ch = rows[r][static_cast<std::size_t>(c)];
            switch (ch) {
            case '#': walls.push_back(1); break;
            case '.': walls.push_back(0); break;
            case 'S':
                if (start)
                    throw FormatError("maze: more than one start 'S'");
                start = Pos{r, c};
                walls.push_back(0);
                break;
            case 'G':
                if (goal)
                    throw FormatError("maze: more than one goal 'G'");
                goal = Pos{r, c};
                walls.push_back(0);
                break;
            default:
                throw FormatError(std::string("maze: unexpected character '") + ch + "' in row "
                                  + std::to_string(r));
            }
        }
    }
    if (!start)
        throw FormatError("maze: no start 'S'");
    if (!goal)
        throw FormatError("maze: no goal 'G'");
    return Maze(name, n_rows, n_cols, std::move(walls), *start, *goal, max_steps);
}

Maze load_maze(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw IoError("maze: cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_maze(ss.str());
}

int shortest_path_length(const Maze& maze)
{
    const int d = bfs(maze, maze.start())[static_cast<std::size_t>(maze.goal().row * maze.cols()
                                                                   + maze.goal().col)];
    if (d < 0)
        throw ValidationError("maze: goal unreachable");
    return d;
}

std::vector<Action> shortest_path(const Maze& maze)
{
    // Walk downhill on the distance-to-goal field.
    const auto to_goal = bfs(maze, maze.goal());
    auto dist = [&](Pos p) { return to_goal[static_cast<std::size_t>(p.row * maze.cols() + p.col)]; };
    if (dist(maze.start()) < 0)
        throw ValidationError("maze: goal unreachable");
    std::vector<Action> path;
    Pos p = maze.start();
    while (!(p == maze.goal())) {
        for (int a = 0; a < kNumActions; ++a) {
            const Pos n = moved(p, static_cast<Action>(a));
            if (!maze.is_wall(n) && dist(n) == dist(p) - 1) {
                path.push_back(static_cast<Action>(a));
                p = n;
                break;
            }
        }
    }
    return path;
}

double optimal_return(const Maze& maze)
{
    return 1.0 - 0.001 * shortest_path_length(maze);
}

} // namespace vpclab::env
