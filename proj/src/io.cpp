#include "robsid/io.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "robsid/errors.hpp"

namespace robsid {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

DataError line_error(const std::string& source, long line, const std::string& what) {
    return DataError(source + ":" + std::to_string(line) + ": " + what);
}

double parse_number(const std::string& cell, const std::string& source, long line) {
    double v = 0.0;
    const char* first = cell.data();
    const char* last = cell.data() + cell.size();
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (cell.empty() || ec != std::errc() || ptr != last)
        throw line_error(source, line, "not a number: '" + cell + "'");
    return v;
}

bool parse_meta_line(const std::string& line, std::pair<std::string, std::string>& kv) {
    std::string body = trim(line.substr(1));
    const auto eq = body.find('=');
    if (eq == std::string::npos) return false;
    kv = {trim(body.substr(0, eq)), trim(body.substr(eq + 1))};
    return true;
}

void write_meta(std::ostream& os, const Metadata& meta) {
    bool has_version = false;
    for (const auto& [k, v] : meta) has_version |= (k == "version");
    if (!has_version) os << "# version=" << kVersion << '\n';
    for (const auto& [k, v] : meta) os << "# " << k << '=' << v << '\n';
}

std::ifstream open_input(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path + "'");
    return in;
}

}  // namespace

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

const std::string* find_meta(const Metadata& meta, const std::string& key) {
    for (const auto& [k, v] : meta)
        if (k == key) return &v;
    return nullptr;
}

void write_dataset(std::ostream& os, const Dataset& data) {
    if (data.u.cols() != data.y.cols())
        throw DataError("write_dataset: u and y differ in length");
    write_meta(os, data.meta);
    std::string sep;
    for (Index k = 0; k < data.u.rows(); ++k, sep = ",") os << sep << "u_" << k + 1;
    for (Index k = 0; k < data.y.rows(); ++k, sep = ",") os << sep << "y_" << k + 1;
    os << '\n';
    for (Index t = 0; t < data.u.cols(); ++t) {
        sep.clear();
        for (Index k = 0; k < data.u.rows(); ++k, sep = ",") os << sep << format_double(data.u(k, t));
        for (Index k = 0; k < data.y.rows(); ++k, sep = ",") os << sep << format_double(data.y(k, t));
        os << '\n';
    }
}

Dataset read_dataset(std::istream& is, const std::string& source) {
    Dataset data;
    std::string line;
    long lineno = 0;
    std::vector<std::string> header;
    while (std::getline(is, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty()) continue;
        if (t[0] == '#') {
            std::pair<std::string, std::string> kv;
            if (parse_meta_line(t, kv)) data.meta.push_back(kv);
            continue;
        }
        header = split(t);
        break;
    }
    if (header.empty()) throw DataError(source + ": missing header row");

    // Column k maps to u or y with the index given by its suffix.
    std::vector<std::pair<bool, Index>> cols;
    Index n_i = 0, n_o = 0;
    for (const auto& name : header) {
        const bool is_u = name.rfind("u_", 0) == 0;
        const bool is_y = name.rfind("y_", 0) == 0;
        if (!is_u && !is_y) throw line_error(source, lineno, "unexpected column '" + name + "'");
        Index idx = 0;
        const std::string digits = name.substr(2);
        auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), idx);
        if (digits.empty() || ec != std::errc() || ptr != digits.data() + digits.size() || idx < 1)
            throw line_error(source, lineno, "bad column name '" + name + "'");
        cols.emplace_back(is_u, idx - 1);
        if (is_u) n_i = std::max(n_i, idx);
        else n_o = std::max(n_o, idx);
    }
    if (n_i + n_o != static_cast<Index>(cols.size()))
        throw line_error(source, lineno, "columns must be u_1..u_ni, y_1..y_no without gaps");
    if (n_i == 0 || n_o == 0) throw line_error(source, lineno, "need at least one u and one y column");

    std::vector<std::vector<double>> rows;
    while (std::getline(is, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const auto cells = split(t);
        if (cells.size() != cols.size())
            throw line_error(source, lineno,
                             "expected " + std::to_string(cols.size()) + " fields, got " +
                                 std::to_string(cells.size()));
        std::vector<double> row;
        row.reserve(cells.size());
        for (const auto& c : cells) row.push_back(parse_number(c, source, lineno));
        rows.push_back(std::move(row));
    }
    const Index n = static_cast<Index>(rows.size());
    if (n == 0) throw DataError(source + ": no data rows");
    data.u.resize(n_i, n);
    data.y.resize(n_o, n);
    for (Index t = 0; t < n; ++t) {
        for (std::size_t k = 0; k < cols.size(); ++k) {
            const auto [is_u, idx] = cols[k];
            (is_u ? data.u : data.y)(idx, t) = rows[static_cast<std::size_t>(t)][k];
        }
    }
    return data;
}

Dataset read_dataset_file(const std::string& path) {
    auto in = open_input(path);
    return read_dataset(in, path);
}

void write_matrices(std::ostream& os, const MatrixSet& matrices, const Metadata& meta) {
    write_meta(os, meta);
    for (const auto& [name, m] : matrices) {
        os << "# matrix=" << name << '\n' << "# shape=" << m.rows() << ',' << m.cols() << '\n';
        for (Index r = 0; r < m.rows(); ++r) {
            for (Index c = 0; c < m.cols(); ++c) os << (c ? "," : "") << format_double(m(r, c));
            os << '\n';
        }
    }
}

MatrixSet read_matrices(std::istream& is, Metadata* meta, const std::string& source) {
    MatrixSet out;
    std::string line;
    long lineno = 0;
    std::string pending_name;
    Index row = 0;
    bool have_shape = false;
    auto finish = [&] {
        if (have_shape && row != out.back().second.rows())
            throw line_error(source, lineno,
                             "matrix '" + out.back().first + "' has " + std::to_string(row) +
                                 " rows, header says " + std::to_string(out.back().second.rows()));
        have_shape = false;
    };
    while (std::getline(is, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty()) continue;
        if (t[0] == '#') {
            std::pair<std::string, std::string> kv;
            if (!parse_meta_line(t, kv)) continue;
            if (kv.first == "matrix") {
                finish();
                pending_name = kv.second;
            } else if (kv.first == "shape") {
                finish();
                const auto dims = split(kv.second);
                if (dims.size() != 2) throw line_error(source, lineno, "bad shape '" + kv.second + "'");
                const double r = parse_number(dims[0], source, lineno);
                const double c = parse_number(dims[1], source, lineno);
                if (r < 0 || c < 0 || r != static_cast<Index>(r) || c != static_cast<Index>(c))
                    throw line_error(source, lineno, "bad shape '" + kv.second + "'");
                out.emplace_back(pending_name.empty() ? std::to_string(out.size()) : pending_name,
                                 Matrix(static_cast<Index>(r), static_cast<Index>(c)));
                pending_name.clear();
                row = 0;
                have_shape = true;
            } else if (meta) {
                meta->push_back(kv);
            }
            continue;
        }
        if (!have_shape) throw line_error(source, lineno, "data row before a shape header");
        Matrix& m = out.back().second;
        if (row >= m.rows()) throw line_error(source, lineno, "more rows than the shape header");
        const auto cells = split(t);
        if (static_cast<Index>(cells.size()) != m.cols())
            throw line_error(source, lineno,
                             "expected " + std::to_string(m.cols()) + " fields, got " +
                                 std::to_string(cells.size()));
        for (Index c = 0; c < m.cols(); ++c)
            m(row, c) = parse_number(cells[static_cast<std::size_t>(c)], source, lineno);
        ++row;
    }
    finish();
    if (out.empty()) throw DataError(source + ": no matrix found");
    return out;
}

MatrixSet read_matrices_file(const std::string& path, Metadata* meta) {
    auto in = open_input(path);
    return read_matrices(in, meta, path);
}

const Matrix& find_matrix(const MatrixSet& set, const std::string& name) {
    for (const auto& [n, m] : set)
        if (n == name) return m;
    throw DataError("no matrix named '" + name + "'");
}

void write_text_file(const std::string& path, const std::string& contents) {
    const std::filesystem::path p(path);
    std::error_code ec;
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path(), ec);
    std::ofstream out(p, std::ios::binary);
    if (!out) throw DataError("cannot write '" + path + "'");
    out << contents;
    if (!out) throw DataError("write failed for '" + path + "'");
}

}  // namespace robsid
