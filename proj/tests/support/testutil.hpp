#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>

#include "afa/rng.hpp"
#include "afa/tensor.hpp"

namespace testsupport {

inline afa::Tensor random_tensor(std::size_t rows, std::size_t cols, afa::RngStream& rng,
                                 double scale = 1.0, bool requires_grad = true) {
    afa::Tensor t = afa::Tensor::zeros(rows, cols, requires_grad);
    for (double& v : t.mutable_values()) v = rng.normal(0.0, scale);
    return t;
}

/// Positive random tensor (for weights / probabilities).
inline afa::Tensor random_positive(std::size_t rows, std::size_t cols, afa::RngStream& rng,
                                   double lo = 0.05, double hi = 1.0, bool requires_grad = true) {
    afa::Tensor t = afa::Tensor::zeros(rows, cols, requires_grad);
    for (double& v : t.mutable_values()) v = lo + (hi - lo) * rng.uniform01();
    return t;
}

inline double chi_squared_statistic(const std::vector<long>& observed, double expected) {
    double stat = 0.0;
    for (long o : observed) {
        const double d = static_cast<double>(o) - expected;
        stat += d * d / expected;
    }
    return stat;
}

inline double chi_squared_quantile(double p, int dof) {
    const boost::math::chi_squared dist(dof);
    return boost::math::quantile(dist, p);
}

/// Unique scratch directory, removed on destruction.
struct TempDir {
    std::filesystem::path path;

    explicit TempDir(const std::string& tag) {
        static std::atomic<unsigned> counter{0};
        path = std::filesystem::temp_directory_path() /
               ("afa_test_" + tag + "_" + std::to_string(::getpid()) + "_" +
                std::to_string(counter.fetch_add(1)));
        std::filesystem::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    out << content;
}

/// Rudimentary XML well-formedness check: tags balance and quotes close.
inline bool xml_well_formed(const std::string& doc) {
    std::vector<std::string> stack;
    std::size_t i = 0;
    while (i < doc.size()) {
        if (doc[i] != '<') {
            ++i;
            continue;
        }
        const std::size_t end = doc.find('>', i);
        if (end == std::string::npos) return false;
        std::string tag = doc.substr(i + 1, end - i - 1);
        i = end + 1;
        if (tag.empty()) return false;
        if (tag[0] == '?' || tag[0] == '!') continue;  // declaration / doctype
        const bool closing = tag[0] == '/';
        const bool self_closing = tag.back() == '/';
        std::string name = tag.substr(closing ? 1 : 0);
        const std::size_t sp = name.find_first_of(" \t\n/");
        if (sp != std::string::npos) name.resize(sp);
        if (name.empty()) return false;
        if (closing) {
            if (stack.empty() || stack.back() != name) return false;
            stack.pop_back();
        } else if (!self_closing) {
            stack.push_back(name);
        }
    }
    return stack.empty();
}

} // namespace testsupport
