#include "vpclab/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <type_traits>

#include "json.hpp"

namespace vpclab {

namespace {

using nlohmann::json;

template <typename T>
constexpr const char* dtype_name()
{
    if constexpr (std::is_same_v<T, float>)
        return "float32";
    else
        return "float64";
}

template <typename T>
void to_little_endian(std::vector<char>& bytes)
{
    if constexpr (std::endian::native == std::endian::big) {
        for (std::size_t i = 0; i + sizeof(T) <= bytes.size(); i += sizeof(T))
            std::reverse(bytes.begin() + i, bytes.begin() + i + sizeof(T));
    }
}

std::filesystem::path manifest_path(const std::filesystem::path& path)
{
    return std::filesystem::is_directory(path) ? path / "manifest.json" : path;
}

} // namespace

template <typename T>
void save_checkpoint(const std::filesystem::path& dir, const ParamSet<T>& params,
                     const std::map<std::string, std::string>& metadata)
{
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec)
        throw IoError("checkpoint: cannot create " + dir.string() + ": " + ec.message());

    json manifest;
    manifest["format"] = "vpclab-checkpoint";
    manifest["format_version"] = 1;
    manifest["dtype"] = dtype_name<T>();
    manifest["blob"] = "params.bin";
    manifest["param_version"] = params.version();
    manifest["metadata"] = metadata;
    manifest["tensors"] = json::array();

    std::vector<char> blob;
    for (const auto& [name, t] : params) {
        const std::size_t nbytes = t.size() * sizeof(T);
        manifest["tensors"].push_back({{"name", name},
                                       {"shape", t.shape},
                                       {"dtype", dtype_name<T>()},
                                       {"offset", blob.size()},
                                       {"nbytes", nbytes}});
        std::vector<char> bytes(nbytes);
        std::memcpy(bytes.data(), t.data.data(), nbytes);
        to_little_endian<T>(bytes);
        blob.insert(blob.end(), bytes.begin(), bytes.end());
    }

    std::ofstream bin(dir / "params.bin", std::ios::binary | std::ios::trunc);
    bin.write(blob.data(), static_cast<std::streamsize>(blob.size()));
    std::ofstream man(dir / "manifest.json", std::ios::trunc);
    man << manifest.dump(2) << '\n';
    if (!bin || !man)
        throw IoError("checkpoint: failed writing to " + dir.string());
}

template <typename T>
ParamSet<T> load_checkpoint(const std::filesystem::path& path, Checkpoint* info)
{
    const auto mpath = manifest_path(path);
    std::ifstream man(mpath);
    if (!man)
        throw IoError("checkpoint: cannot open " + mpath.string());
    json manifest;
    try {
        manifest = json::parse(man);
    } catch (const json::exception& e) {
        throw FormatError("checkpoint: bad manifest " + mpath.string() + ": " + e.what());
    }

    ParamSet<T> params;
    try {
        if (manifest.at("dtype").get<std::string>() != dtype_name<T>())
            throw FormatError("checkpoint: dtype " + manifest.at("dtype").get<std::string>()
                              + " does not match requested " + dtype_name<T>());
        const auto blob_path = mpath.parent_path() / manifest.at("blob").get<std::string>();
        std::ifstream bin(blob_path, std::ios::binary);
        if (!bin)
            throw IoError("checkpoint: cannot open " + blob_path.string());
        std::vector<char> blob((std::istreambuf_iterator<char>(bin)), std::istreambuf_iterator<char>());

        for (const auto& entry : manifest.at("tensors")) {
            const auto name = entry.at("name").get<std::string>();
            const auto shape = entry.at("shape").get<Shape>();
            const auto offset = entry.at("offset").get<std::size_t>();
            const auto nbytes = entry.at("nbytes").get<std::size_t>();
            if (nbytes != numel(shape) * sizeof(T) || offset + nbytes > blob.size())
                throw FormatError("checkpoint: tensor '" + name + "' does not fit the blob");
            std::vector<char> bytes(blob.begin() + static_cast<std::ptrdiff_t>(offset),
                                    blob.begin() + static_cast<std::ptrdiff_t>(offset + nbytes));
            to_little_endian<T>(bytes);
            Tensor<T> t(shape);
            std::memcpy(t.data.data(), bytes.data(), nbytes);
            params.add(name, std::move(t));
        }
        params.set_version(manifest.value("param_version", std::uint64_t{0}));
        if (info)
            info->metadata = manifest.value("metadata", std::map<std::string, std::string>{});
    } catch (const json::exception& e) {
        throw FormatError("checkpoint: bad manifest " + mpath.string() + ": " + e.what());
    }
    return params;
}

template void save_checkpoint<float>(const std::filesystem::path&, const ParamSet<float>&,
                                     const std::map<std::string, std::string>&);
template void save_checkpoint<double>(const std::filesystem::path&, const ParamSet<double>&,
                                      const std::map<std::string, std::string>&);
template ParamSet<float> load_checkpoint<float>(const std::filesystem::path&, Checkpoint*);
template ParamSet<double> load_checkpoint<double>(const std::filesystem::path&, Checkpoint*);

} // namespace vpclab
