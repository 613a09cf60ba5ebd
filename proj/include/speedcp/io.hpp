#pragma once

#include <Eigen/Dense>
#include <json.hpp>

#include <string>
#include <vector>

namespace speedcp {

// CSV with an optional single header row; numeric cells only.
Eigen::MatrixXd read_csv_matrix(const std::string& path, bool header = true);
void write_csv_matrix(const std::string& path, const Eigen::MatrixXd& m,
                      const std::vector<std::string>& header = {});

// Config files: .json parsed directly, anything else treated as a flat TOML
// subset (key = value with numbers, strings, booleans, and arrays).
nlohmann::json load_config(const std::string& path);
nlohmann::json parse_toml_lite(const std::string& text);

void write_text_file(const std::string& path, const std::string& text);
std::string read_text_file(const std::string& path);

}  // namespace speedcp
