#pragma once

#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace sptree {

// CSV writer emitting floats at 17 significant digits (round-trip exact).
class CsvWriter {
public:
    CsvWriter(const std::string& path, const std::vector<std::string>& header)
        : out_(path) {
        if (!out_) throw std::runtime_error("CsvWriter: cannot open " + path);
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (i) out_ << ',';
            out_ << header[i];
        }
        out_ << '\n';
        columns_ = header.size();
    }

    void row(const std::vector<double>& values) {
        if (values.size() != columns_)
            throw std::invalid_argument("CsvWriter: column count mismatch");
        char buf[32];
        for (std::size_t i = 0; i < values.size(); ++i) {
            if (i) out_ << ',';
            std::snprintf(buf, sizeof buf, "%.17g", values[i]);
            out_ << buf;
        }
        out_ << '\n';
    }

    // mixed row: leading integer columns then doubles
    void row_mixed(const std::vector<long long>& ints,
                   const std::vector<double>& values) {
        if (ints.size() + values.size() != columns_)
            throw std::invalid_argument("CsvWriter: column count mismatch");
        char buf[32];
        bool first = true;
        for (long long v : ints) {
            if (!first) out_ << ',';
            first = false;
            out_ << v;
        }
        for (double v : values) {
            if (!first) out_ << ',';
            first = false;
            std::snprintf(buf, sizeof buf, "%.17g", v);
            out_ << buf;
        }
        out_ << '\n';
    }

private:
    std::ofstream out_;
    std::size_t columns_ = 0;
};

}  // namespace sptree
