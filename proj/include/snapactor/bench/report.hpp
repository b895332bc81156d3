// Copyright the snapactor contributors. SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "snapactor/errors.hpp"

namespace snapactor::bench {

/// Line-oriented CSV: header row, one record per row.
class csv_writer {
public:
    explicit csv_writer(std::vector<std::string> columns) : columns_(std::move(columns)) {}

    void add_row(std::vector<std::string> cells) {
        if (cells.size() != columns_.size())
            raise(errc::invalid_state, "csv row width mismatch");
        rows_.push_back(std::move(cells));
    }

    std::size_t rows() const { return rows_.size(); }

    std::string to_string() const {
        std::string out = join(columns_);
        for (const auto& r : rows_)
            out += join(r);
        return out;
    }

    void write(const std::string& path) const {
        std::ofstream f(path, std::ios::trunc);
        if (!f)
            raise(errc::io_error, "cannot open " + path);
        f << to_string();
    }

private:
    static std::string join(const std::vector<std::string>& cells) {
        std::string line;
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i)
                line += ',';
            line += cells[i];
        }
        line += '\n';
        return line;
    }

    std::vector<std::string> columns_;
    std::vector<std::vector<std::string>> rows_;
};

/// key=value text, one pair per line, insertion-ordered.
class summary_writer {
public:
    void set(const std::string& key, const std::string& v) {
        order_.push_back(key);
        values_[key] = v;
    }
    void set(const std::string& key, std::uint64_t v) { set(key, std::to_string(v)); }
    void set(const std::string& key, std::int64_t v) { set(key, std::to_string(v)); }
    void set(const std::string& key, double v) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.6f", v);
        set(key, std::string(buf));
    }

    std::string to_string() const {
        std::string out;
        for (const auto& k : order_)
            out += k + "=" + values_.at(k) + "\n";
        return out;
    }

    void write(const std::string& path) const {
        std::ofstream f(path, std::ios::trunc);
        if (!f)
            raise(errc::io_error, "cannot open " + path);
        f << to_string();
    }

private:
    std::vector<std::string> order_;
    std::map<std::string, std::string> values_;
};

inline std::string format_us(double us) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.1f", us);
    return std::string(buf);
}

} // namespace snapactor::bench
