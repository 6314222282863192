#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "glwb/common.hpp"

namespace glwb {

// Minimal CSV emitter.  Every file starts with the resolved run configuration
// as '#'-prefixed comment lines so outputs are self-describing.
class CsvWriter {
public:
    CsvWriter(const std::string& path, const std::string& provenance,
              const std::vector<std::string>& columns)
        : out_(path) {
        if (!out_) throw ConfigError("cannot open output file '" + path + "'");
        out_.precision(12);
        std::istringstream prov(provenance);
        std::string line;
        while (std::getline(prov, line)) out_ << "# " << line << '\n';
        for (size_t i = 0; i < columns.size(); ++i)
            out_ << columns[i] << (i + 1 < columns.size() ? ',' : '\n');
    }

    template <class... Ts>
    void row(const Ts&... fields) {
        bool first = true;
        ((out_ << (first ? "" : ","), first = false, out_ << fields), ...);
        out_ << '\n';
    }

private:
    std::ofstream out_;
};

} // namespace glwb
