#pragma once

#include "graphik/datagen.hpp"

#include <string>
#include <vector>

namespace graphik {

struct ColumnSpec {
    std::string name;
    std::string unit;
};

/// Column layout shared by the binary and text formats: per joint
/// a_i, d_i, alpha_i, theta_i_deg, theta_i_rad, theta_off_i, A_i_rc (row-major),
/// then x, y, z, Phi, Theta, Psi.
std::vector<ColumnSpec> dataset_columns(int dof);

inline constexpr char kDatasetMagic[8] = {'G', 'I', 'K', 'D', 'S', 'E', 'T', '1'};
inline constexpr int kDatasetFormatVersion = 1;

// Binary layout: 8-byte magic, little-endian u64 header length, UTF-8 JSON
// header (format, version, dof, rows, config_id, seed, role, config, columns),
// then each column as `rows` little-endian IEEE-754 doubles.
void write_dataset(const Dataset& dataset, const std::string& path);
Dataset read_dataset(const std::string& path);
/// Header only, without loading the columns.
nlohmann::json read_dataset_header(const std::string& path);

/// Comma-separated export with one column per sample field and a header row.
void export_csv(const Dataset& dataset, const std::string& path);

}  // namespace graphik
