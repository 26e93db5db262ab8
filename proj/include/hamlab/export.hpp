#pragma once

#include <fstream>
#include <string>

#include "json.hpp"

#include "hamlab/linear_flow.hpp"

namespace hamlab::linear_flow {

// JSON form of a law: mean vector plus row-major covariance.
inline nlohmann::ordered_json law_to_json(const GaussianLaw& law) {
    nlohmann::ordered_json j;
    j["d1"] = law.d1;
    j["d2"] = law.d2;
    j["n_w"] = law.n_w;
    std::vector<double> mean(law.mean.data(), law.mean.data() + law.mean.size());
    j["mean"] = mean;
    std::vector<double> cov;
    cov.reserve(law.cov.size());
    for (Eigen::Index r = 0; r < law.cov.rows(); ++r)
        for (Eigen::Index c = 0; c < law.cov.cols(); ++c) cov.push_back(law.cov(r, c));
    j["cov_row_major"] = cov;
    return j;
}

inline void write_law_json(const GaussianLaw& law, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_law_json: cannot open " + path);
    out << law_to_json(law).dump(2) << '\n';
}

}  // namespace hamlab::linear_flow
