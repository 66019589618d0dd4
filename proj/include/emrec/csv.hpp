#ifndef EMREC_CSV_HPP
#define EMREC_CSV_HPP

#include <cstdio>
#include <fstream>
#include <optional>
#include <string>

#include "emrec/io_common.hpp"

namespace emrec {

inline std::string csv_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string csv_optional(const std::optional<double>& v) {
    return v ? csv_double(*v) : std::string{};
}

class CsvWriter {
public:
    explicit CsvWriter(const std::string& path) : os_(path, std::ios::trunc) {
        if (!os_) throw IoError("cannot open for writing: " + path);
    }

    void row(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) os_ << ',';
            os_ << cells[i];
        }
        os_ << '\n';
    }

private:
    std::ofstream os_;
};

} // namespace emrec

#endif
