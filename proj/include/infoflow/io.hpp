#ifndef INFOFLOW_IO_HPP
#define INFOFLOW_IO_HPP

#include <iosfwd>
#include <string>

#include <nlohmann/json.hpp>

#include "infoflow/core.hpp"

namespace infoflow::io {

/// Throws IoError when the file cannot be read.
std::string read_text_file(const std::string &path);
/// Throws IoError when the file cannot be read or is not valid JSON.
nlohmann::json read_json_file(const std::string &path);
/// Writes the whole buffer in binary mode. Throws IoError on failure.
void write_text_file(const std::string &path, const std::string &content);
/// Creates the directory and its parents. Throws IoError on failure.
void ensure_directory(const std::string &path);
std::string join(const std::string &dir, const std::string &name);

/// `particle_id,dim_0..dim_{D-1}`.
void write_points_csv(std::ostream &out, const ParticleSet &ps);

/// Compact single-line dump followed by a newline.
std::string json_line(const nlohmann::json &doc);

} // namespace infoflow::io

#endif
