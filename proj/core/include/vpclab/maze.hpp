#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "vpclab/tensor.hpp"

namespace vpclab::env {

struct Pos {
    int row = 0;
    int col = 0;
    friend bool operator==(Pos, Pos) = default;
};

enum class Action : int { Up = 0, Right = 1, Down = 2, Left = 3 };
inline constexpr int kNumActions = 4;

Pos moved(Pos p, Action a);
std::string_view action_name(Action a);

/// Immutable grid world. Cells outside the grid count as walls. The
/// constructor validates start/goal placement and reachability.
class Maze {
public:
    Maze(std::string name, int rows, int cols, std::vector<std::uint8_t> walls, Pos start,
         Pos goal, int max_steps);

    const std::string& name() const { return name_; }
    int rows() const { return rows_; }
    int cols() const { return cols_; }
    Pos start() const { return start_; }
    Pos goal() const { return goal_; }
    int max_steps() const { return max_steps_; }

    bool in_bounds(Pos p) const { return p.row >= 0 && p.row < rows_ && p.col >= 0 && p.col < cols_; }
    bool is_wall(Pos p) const;
    std::vector<Pos> free_cells() const;

private:
    std::string name_;
    int rows_;
    int cols_;
    std::vector<std::uint8_t> walls_;
    Pos start_;
    Pos goal_;
    int max_steps_;
};

inline constexpr int kDefaultMaxSteps = 100;

/// Parses the ASCII maze format: optional `name=` / `max_steps=` header lines,
/// then equal-length rows of '#' (wall), '.' (free), 'S' (start), 'G' (goal).
/// Throws FormatError for malformed text, ValidationError for an unreachable goal.
Maze parse_maze(std::string_view text);
Maze load_maze(const std::filesystem::path& path);

/// 4-connected BFS distance from start to goal.
int shortest_path_length(const Maze& maze);

/// One BFS-optimal action sequence from start to goal.
std::vector<Action> shortest_path(const Maze& maze);

/// Return of an episode that follows a shortest path.
double optimal_return(const Maze& maze);

} // namespace vpclab::env
