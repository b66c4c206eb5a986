#include "graphik/dataset_io.hpp"

#include "graphik/errors.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>

namespace graphik {
namespace {

static_assert(std::endian::native == std::endian::little, "dataset format assumes a little-endian host");

void fill_row(const Dataset& ds, std::size_t r, std::vector<double>& row) {
    const int dof = ds.dof();
    row.clear();
    const auto theta = ds.theta_row(r);
    for (int i = 0; i < dof; ++i) {
        const auto& j = ds.config.joints[i];
        row.push_back(j.a);
        row.push_back(j.d);
        row.push_back(j.alpha);
        row.push_back(theta[i]);
        row.push_back(deg_to_rad(theta[i]));
        row.push_back(j.theta_off);
        const Transform m = dh_matrix(j, theta[i]);
        for (int rr = 0; rr < 4; ++rr)
            for (int cc = 0; cc < 4; ++cc) row.push_back(m(rr, cc));
    }
    const auto p = ds.pose_row(r);
    row.insert(row.end(), p.begin(), p.end());
}

constexpr std::size_t kPerJointColumns = 6 + 16;

std::size_t theta_column(int joint) { return static_cast<std::size_t>(joint) * kPerJointColumns + 3; }

}  // namespace

std::vector<ColumnSpec> dataset_columns(int dof) {
    std::vector<ColumnSpec> cols;
    for (int i = 1; i <= dof; ++i) {
        const auto s = std::to_string(i);
        cols.push_back({"a_" + s, "cm"});
        cols.push_back({"d_" + s, "cm"});
        cols.push_back({"alpha_" + s, "deg"});
        cols.push_back({"theta_" + s + "_deg", "deg"});
        cols.push_back({"theta_" + s + "_rad", "rad"});
        cols.push_back({"theta_off_" + s, "deg"});
        for (int r = 0; r < 4; ++r)
            for (int c = 0; c < 4; ++c)
                cols.push_back({"A_" + s + "_" + std::to_string(r) + std::to_string(c), "1"});
    }
    for (const char* name : {"x", "y", "z"}) cols.push_back({name, "cm"});
    for (const char* name : {"Phi", "Theta", "Psi"}) cols.push_back({name, "deg"});
    return cols;
}

void write_dataset(const Dataset& ds, const std::string& path) {
    const auto cols = dataset_columns(ds.dof());
    nlohmann::json header;
    header["format"] = "graphik-dataset";
    header["version"] = kDatasetFormatVersion;
    header["dof"] = ds.dof();
    header["rows"] = ds.rows();
    header["config_id"] = ds.config_id;
    header["seed"] = ds.seed;
    header["role"] = ds.role;
    header["config"] = ds.config;
    header["columns"] = nlohmann::json::array();
    for (const auto& c : cols) header["columns"].push_back({{"name", c.name}, {"unit", c.unit}});
    const std::string text = header.dump();

    // Transpose into columns so each is contiguous on disk.
    const std::size_t rows = ds.rows();
    std::vector<double> columnar(cols.size() * rows);
    std::vector<double> row;
    for (std::size_t r = 0; r < rows; ++r) {
        fill_row(ds, r, row);
        for (std::size_t c = 0; c < cols.size(); ++c) columnar[c * rows + r] = row[c];
    }

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write dataset " + path);
    const std::uint64_t header_len = text.size();
    out.write(kDatasetMagic, sizeof kDatasetMagic);
    out.write(reinterpret_cast<const char*>(&header_len), sizeof header_len);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    out.write(reinterpret_cast<const char*>(columnar.data()),
              static_cast<std::streamsize>(columnar.size() * sizeof(double)));
    if (!out) throw IoError("short write on dataset " + path);
}

namespace {

nlohmann::json read_header(std::ifstream& in, const std::string& path) {
    char magic[8];
    std::uint64_t header_len = 0;
    in.read(magic, sizeof magic);
    in.read(reinterpret_cast<char*>(&header_len), sizeof header_len);
    if (!in || std::memcmp(magic, kDatasetMagic, sizeof magic) != 0) {
        throw IoError(path + " is not a graphik dataset");
    }
    if (header_len > (1u << 26)) throw IoError(path + ": implausible header length");
    std::string text(header_len, '\0');
    in.read(text.data(), static_cast<std::streamsize>(header_len));
    if (!in) throw IoError(path + ": truncated header");
    try {
        auto header = nlohmann::json::parse(text);
        if (header.at("format") != "graphik-dataset" || header.at("version") != kDatasetFormatVersion) {
            throw IoError(path + ": unsupported dataset format/version");
        }
        return header;
    } catch (const nlohmann::json::exception& e) {
        throw IoError(path + ": malformed header: " + e.what());
    }
}

}  // namespace

nlohmann::json read_dataset_header(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open dataset " + path);
    return read_header(in, path);
}

Dataset read_dataset(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open dataset " + path);
    const auto header = read_header(in, path);

    Dataset ds;
    try {
        ds.config = header.at("config").get<ManipulatorConfig>();
        ds.config_id = header.at("config_id").get<int>();
        ds.seed = header.at("seed").get<std::uint64_t>();
        ds.role = header.at("role").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw IoError(path + ": malformed header: " + e.what());
    }
    const int dof = ds.dof();
    const auto rows = header.at("rows").get<std::size_t>();
    const auto cols = dataset_columns(dof);
    if (header.at("columns").size() != cols.size()) throw IoError(path + ": unexpected column count");
    for (std::size_t c = 0; c < cols.size(); ++c) {
        if (header["columns"][c].at("name") != cols[c].name) throw IoError(path + ": unexpected column " + cols[c].name);
    }

    std::vector<double> column(rows);
    ds.theta_deg.resize(rows * static_cast<std::size_t>(dof));
    ds.pose.resize(rows * 6);
    const std::size_t pose_first = cols.size() - 6;
    for (std::size_t c = 0; c < cols.size(); ++c) {
        in.read(reinterpret_cast<char*>(column.data()), static_cast<std::streamsize>(rows * sizeof(double)));
        if (!in) throw IoError(path + ": truncated column " + cols[c].name);
        for (int j = 0; j < dof; ++j) {
            if (c == theta_column(j)) {
                for (std::size_t r = 0; r < rows; ++r) ds.theta_deg[r * dof + j] = column[r];
            }
        }
        if (c >= pose_first) {
            for (std::size_t r = 0; r < rows; ++r) ds.pose[r * 6 + (c - pose_first)] = column[r];
        }
    }
    return ds;
}

void export_csv(const Dataset& ds, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write " + path);
    const auto cols = dataset_columns(ds.dof());
    for (std::size_t c = 0; c < cols.size(); ++c) out << (c ? "," : "") << cols[c].name;
    out << '\n' << std::setprecision(17);
    std::vector<double> row;
    for (std::size_t r = 0; r < ds.rows(); ++r) {
        fill_row(ds, r, row);
        for (std::size_t c = 0; c < row.size(); ++c) out << (c ? "," : "") << row[c];
        out << '\n';
    }
    if (!out) throw IoError("short write on " + path);
}

}  // namespace graphik
