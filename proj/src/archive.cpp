#include "unifix/archive.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

namespace unifix {

namespace {

constexpr char kMagic[8] = {'U', 'N', 'F', 'X', 'P', 'A', 'R', 'M'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& os, std::uint32_t v)
{
    os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

std::uint32_t get_u32(std::istream& is)
{
    std::uint32_t v = 0;
    is.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!is) throw IoError("parameter archive truncated");
    return v;
}

} // namespace

template <typename Scalar>
void save_params(const std::filesystem::path& path, const ParamList<Scalar>& params)
{
    std::ostringstream os(std::ios::binary);
    os.write(kMagic, sizeof kMagic);
    put_u32(os, kVersion);
    put_u32(os, sizeof(Scalar));
    put_u32(os, static_cast<std::uint32_t>(params.size()));
    for (const auto& p : params) {
        put_u32(os, static_cast<std::uint32_t>(p.name.size()));
        os.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
        put_u32(os, static_cast<std::uint32_t>(p.value->rows()));
        put_u32(os, static_cast<std::uint32_t>(p.value->cols()));
        os.write(reinterpret_cast<const char*>(p.value->data()),
                 static_cast<std::streamsize>(sizeof(Scalar) * static_cast<std::size_t>(p.value->size())));
    }
    write_text_file(path, os.str());
}

template <typename Scalar>
void load_params(const std::filesystem::path& path, const ParamList<Scalar>& params)
{
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open parameter archive " + path.string());
    char magic[sizeof kMagic];
    is.read(magic, sizeof magic);
    if (!is || std::memcmp(magic, kMagic, sizeof kMagic) != 0) throw IoError(path.string() + ": not a parameter archive");
    if (get_u32(is) != kVersion) throw IoError(path.string() + ": unsupported archive version");
    if (get_u32(is) != sizeof(Scalar)) throw IoError(path.string() + ": scalar width mismatch");
    const std::uint32_t count = get_u32(is);
    if (count != params.size())
        throw IoError(path.string() + ": archive holds " + std::to_string(count) + " tensors, expected " +
                      std::to_string(params.size()));
    for (const auto& p : params) {
        std::string name(get_u32(is), '\0');
        is.read(name.data(), static_cast<std::streamsize>(name.size()));
        const std::uint32_t rows = get_u32(is);
        const std::uint32_t cols = get_u32(is);
        if (name != p.name || rows != p.value->rows() || cols != p.value->cols())
            throw IoError(path.string() + ": tensor '" + name + "' does not match expected '" + p.name + "'");
        is.read(reinterpret_cast<char*>(p.value->data()),
                static_cast<std::streamsize>(sizeof(Scalar) * static_cast<std::size_t>(p.value->size())));
        if (!is) throw IoError(path.string() + ": truncated tensor '" + name + "'");
    }
}

void write_text_file(const std::filesystem::path& path, const std::string& text)
{
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
        if (ec) throw IoError("cannot create directory " + path.parent_path().string() + ": " + ec.message());
    }
    const auto tmp = std::filesystem::path(path.string() + ".tmp");
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw IoError("cannot write " + tmp.string());
        os.write(text.data(), static_cast<std::streamsize>(text.size()));
        if (!os) throw IoError("write failed for " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("cannot rename " + tmp.string() + ": " + ec.message());
}

std::string read_text_file(const std::filesystem::path& path)
{
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open " + path.string());
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

template void save_params(const std::filesystem::path&, const ParamList<float>&);
template void save_params(const std::filesystem::path&, const ParamList<double>&);
template void load_params(const std::filesystem::path&, const ParamList<float>&);
template void load_params(const std::filesystem::path&, const ParamList<double>&);

} // namespace unifix
