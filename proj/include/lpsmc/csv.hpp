// csv.hpp
// Minimal CSV handling: header row, comma separator, '.' decimal point,
// UTF-8 passthrough. Enough for dataset ingestion and artifact emission;
// quoting is not needed for numeric tables.

#pragma once

#include <Eigen/Dense>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "lpsmc/data.hpp"
#include "lpsmc/errors.hpp"

namespace lpsmc {

struct CsvTable {
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;

    int column_index(const std::string& name) const {
        for (std::size_t c = 0; c < columns.size(); ++c) {
            if (columns[c] == name) return static_cast<int>(c);
        }
        return -1;
    }
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    for (char ch : line) {
        if (ch == ',') {
            cells.push_back(cell);
            cell.clear();
        } else if (ch != '\r') {
            cell += ch;
        }
    }
    cells.push_back(cell);
    return cells;
}

inline std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t");
    return s.substr(begin, end - begin + 1);
}

}  // namespace detail

inline CsvTable read_csv(const std::string& path) {
    std::ifstream file(path);
    if (!file) throw CsvError("cannot open file '" + path + "'", 0, "");
    CsvTable table;
    std::string line;
    if (!std::getline(file, line)) throw CsvError("file '" + path + "' has no header row", 0, "");
    for (auto& name : detail::split_csv_line(line)) {
        table.columns.push_back(detail::trim(name));
    }
    long row = 1;
    while (std::getline(file, line)) {
        ++row;
        if (line.empty()) continue;
        auto cells = detail::split_csv_line(line);
        if (cells.size() != table.columns.size()) {
            throw CsvError("expected " + std::to_string(table.columns.size()) + " cells, found " +
                           std::to_string(cells.size()), row, "");
        }
        table.rows.push_back(std::move(cells));
    }
    return table;
}

inline void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream file(path, std::ios::binary);
    if (!file) throw Error("cannot write file '" + path + "'");
    file << content;
}

struct ColumnMapping {
    std::string time_col;
    std::string status_col;
    std::vector<std::string> incidence_cols;  // without the intercept
    std::vector<std::string> latency_cols;
    bool center_continuous = false;  // center covariate columns that are not {0,1}-valued
};

struct LoadReport {
    long rows_total = 0;
    long rows_dropped_missing = 0;
    std::map<std::string, double> centers;  // column -> subtracted mean
};

// Reads and validates a survival dataset. Rows with missing values in any
// mapped column are dropped (counted in the report); malformed cells,
// negative times and status values outside {0,1} are hard errors carrying
// the 1-based data row (header excluded) and column name.
inline SurvivalDataset load_csv(const std::string& path, const ColumnMapping& mapping,
                                LoadReport* report = nullptr) {
    const CsvTable table = read_csv(path);
    std::vector<std::string> needed = {mapping.time_col, mapping.status_col};
    needed.insert(needed.end(), mapping.incidence_cols.begin(), mapping.incidence_cols.end());
    needed.insert(needed.end(), mapping.latency_cols.begin(), mapping.latency_cols.end());
    std::vector<int> indices;
    for (const auto& name : needed) {
        const int idx = table.column_index(name);
        if (idx < 0) throw CsvError("missing column", 0, name);
        indices.push_back(idx);
    }

    LoadReport local;
    local.rows_total = static_cast<long>(table.rows.size());
    std::vector<long> kept;  // indices into table.rows
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        bool missing = false;
        for (int idx : indices) {
            if (detail::trim(table.rows[r][idx]).empty()) {
                missing = true;
                break;
            }
        }
        if (missing) {
            ++local.rows_dropped_missing;
        } else {
            kept.push_back(static_cast<long>(r));
        }
    }
    if (kept.empty()) throw CsvError("no complete rows in file '" + path + "'", 0, "");

    const auto parse = [&](long r, int idx, const std::string& column) {
        const std::string cell = detail::trim(table.rows[r][idx]);
        double value;
        const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), value);
        if (res.ec != std::errc{} || res.ptr != cell.data() + cell.size()) {
            throw CsvError("non-numeric cell '" + cell + "'", r + 1, column);
        }
        return value;
    };

    const long n = static_cast<long>(kept.size());
    SurvivalDataset data;
    data.times.resize(n);
    data.events.resize(n);
    data.X.resize(n, static_cast<Eigen::Index>(mapping.incidence_cols.size()) + 1);
    data.Z.resize(n, static_cast<Eigen::Index>(mapping.latency_cols.size()));

    for (long i = 0; i < n; ++i) {
        const long r = kept[i];
        const double t = parse(r, table.column_index(mapping.time_col), mapping.time_col);
        if (t < 0.0) throw CsvError("negative follow-up time", r + 1, mapping.time_col);
        data.times[i] = t;
        const double status = parse(r, table.column_index(mapping.status_col), mapping.status_col);
        if (status != 0.0 && status != 1.0) {
            throw CsvError("status outside {0,1}", r + 1, mapping.status_col);
        }
        data.events[i] = static_cast<int>(status);
        data.X(i, 0) = 1.0;
        for (std::size_t c = 0; c < mapping.incidence_cols.size(); ++c) {
            data.X(i, static_cast<Eigen::Index>(c) + 1) =
                parse(r, table.column_index(mapping.incidence_cols[c]), mapping.incidence_cols[c]);
        }
        for (std::size_t c = 0; c < mapping.latency_cols.size(); ++c) {
            data.Z(i, static_cast<Eigen::Index>(c)) =
                parse(r, table.column_index(mapping.latency_cols[c]), mapping.latency_cols[c]);
        }
    }

    if (mapping.center_continuous) {
        const auto center_column = [&](Eigen::Ref<Eigen::VectorXd> col, const std::string& name) {
            bool binary = true;
            for (Eigen::Index i = 0; i < col.size() && binary; ++i) {
                binary = col[i] == 0.0 || col[i] == 1.0;
            }
            if (binary) return;
            const double mean = col.mean();
            col.array() -= mean;
            local.centers[name] = mean;
        };
        for (std::size_t c = 0; c < mapping.incidence_cols.size(); ++c) {
            center_column(data.X.col(static_cast<Eigen::Index>(c) + 1), mapping.incidence_cols[c]);
        }
        for (std::size_t c = 0; c < mapping.latency_cols.size(); ++c) {
            center_column(data.Z.col(static_cast<Eigen::Index>(c)), mapping.latency_cols[c]);
        }
    }

    data.validate();
    if (report) *report = local;
    return data;
}

}  // namespace lpsmc
