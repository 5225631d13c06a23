#pragma once

// Comma-delimited text files with a '#' metadata header.

#include <iosfwd>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "robsid/linalg.hpp"

namespace robsid {

inline constexpr const char* kVersion = "0.1.0";

/// Ordered key=value pairs written as "# key=value" header lines.
using Metadata = std::vector<std::pair<std::string, std::string>>;

std::string format_double(double v);
const std::string* find_meta(const Metadata& meta, const std::string& key);

/// Time-series data: one row per sample, header u_1..u_ni,y_1..y_no.
struct Dataset {
    Matrix u;  ///< n_i x T
    Matrix y;  ///< n_o x T
    Metadata meta;
};

void write_dataset(std::ostream& os, const Dataset& data);
/// `source` only appears in error messages.
Dataset read_dataset(std::istream& is, const std::string& source = "<stream>");
Dataset read_dataset_file(const std::string& path);

/// Several named matrices in one file, each introduced by
/// "# matrix=<name>" and "# shape=<rows>,<cols>" and stored row-major.
using MatrixSet = std::vector<std::pair<std::string, Matrix>>;

void write_matrices(std::ostream& os, const MatrixSet& matrices, const Metadata& meta);
MatrixSet read_matrices(std::istream& is, Metadata* meta = nullptr,
                        const std::string& source = "<stream>");
MatrixSet read_matrices_file(const std::string& path, Metadata* meta = nullptr);
const Matrix& find_matrix(const MatrixSet& set, const std::string& name);

/// Creates parent directories; throws DataError when the file cannot be opened.
void write_text_file(const std::string& path, const std::string& contents);

}  // namespace robsid
