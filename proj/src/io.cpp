#include "infoflow/io.hpp"

#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include "infoflow/error.hpp"

namespace infoflow::io {

std::string read_text_file(const std::string &path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
    {
        throw IoError("cannot open '" + path + "'");
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

nlohmann::json read_json_file(const std::string &path)
{
    const std::string text = read_text_file(path);
    try
    {
        return nlohmann::json::parse(text);
    }
    catch (const nlohmann::json::parse_error &e)
    {
        throw IoError("'" + path + "' is not valid JSON: " + e.what());
    }
}

void write_text_file(const std::string &path, const std::string &content)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
    {
        throw IoError("cannot write '" + path + "'");
    }
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out)
    {
        throw IoError("failed while writing '" + path + "'");
    }
}

void ensure_directory(const std::string &path)
{
    std::error_code ec;
    std::filesystem::create_directories(path, ec);
    if (ec || !std::filesystem::is_directory(path))
    {
        throw IoError("cannot create directory '" + path + "'");
    }
}

std::string join(const std::string &dir, const std::string &name)
{
    return (std::filesystem::path(dir) / name).string();
}

void write_points_csv(std::ostream &out, const ParticleSet &ps)
{
    out << "particle_id";
    for (std::size_t d = 0; d < ps.dim(); ++d)
    {
        out << ",dim_" << d;
    }
    out << '\n';
    for (std::size_t i = 0; i < ps.size(); ++i)
    {
        out << i;
        for (double v : ps[i])
        {
            out << ',' << format_double(v);
        }
        out << '\n';
    }
}

std::string json_line(const nlohmann::json &doc)
{
    return doc.dump() + "\n";
}

} // namespace infoflow::io
