#pragma once

#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <string>
#include <vector>

#include "hamlab/common.hpp"

namespace hamlab::csv {

// Minimal RFC-4180-style writer: header row mandatory, numbers printed with a
// fixed round-trip format so identical runs produce identical bytes.
class Writer {
  public:
    Writer(const std::string& path, const std::vector<std::string>& header) {
        std::filesystem::path p(path);
        if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
        out_.open(path);
        if (!out_) throw std::runtime_error("csv: cannot open " + path);
        ncols_ = header.size();
        write_cells(header);
    }

    void row(const std::vector<std::string>& cells) {
        if (cells.size() != ncols_) throw std::logic_error("csv: column count mismatch");
        write_cells(cells);
    }

    void row(std::initializer_list<double> vals) {
        std::vector<std::string> cells;
        cells.reserve(vals.size());
        for (double v : vals) cells.push_back(format_double(v));
        row(cells);
    }

  private:
    static std::string escape(const std::string& s) {
        if (s.find_first_of(",\"\n") == std::string::npos) return s;
        std::string q = "\"";
        for (char c : s) {
            if (c == '"') q += '"';
            q += c;
        }
        return q + "\"";
    }
    void write_cells(const std::vector<std::string>& cells) {
        for (size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << escape(cells[i]);
        out_ << '\n';
    }

    std::ofstream out_;
    size_t ncols_ = 0;
};

}  // namespace hamlab::csv
