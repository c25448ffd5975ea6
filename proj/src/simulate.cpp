#include "flr/simulate.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <vector>

#include "flr/error.hpp"
#include "flr/oracle.hpp"

namespace flr {

std::int64_t fourth_root_floor(std::int64_t n) {
    if (n < 1) return 0;
    auto r = static_cast<std::int64_t>(std::pow(static_cast<double>(n), 0.25));
    auto fourth = [](std::int64_t v) { return v * v * v * v; };
    while (r > 0 && fourth(r) > n) --r;
    while (fourth(r + 1) <= n) ++r;
    return r;
}

std::int64_t default_truncation(std::int64_t n) {
    return std::max<std::int64_t>(4 * fourth_root_floor(n), 128);
}

std::uint64_t mix_seed(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

void SimConfig::validate() const {
    model.validate();
    if (n < 1) throw InvalidArgument("sample size n must be >= 1");
    if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw InvalidArgument("noise level sigma must be >= 0");
    if (!(slope_scale >= 0.0 && slope_scale <= 1.0)) throw InvalidArgument("slope_scale must lie in [0, 1]");
    if (!std::isfinite(rotation)) throw InvalidArgument("rotation angle must be finite");
    if (truncation() < 4 * fourth_root_floor(n))
        throw InvalidArgument("truncation J must be >= 4 floor(n^{1/4})");
}

SlopeSpec make_slope(const SequenceModel& model, std::int64_t J, double slope_scale) {
    model.validate();
    if (J < 1) throw InvalidArgument("make_slope requires J >= 1");
    if (!(slope_scale >= 0.0 && slope_scale <= 1.0)) throw InvalidArgument("slope_scale must lie in [0, 1]");
    if (slope_scale == 0.0) return SlopeSpec{Eigen::VectorXd::Zero(J), 0.0};

    // Work with log [phi]_j so that beta_j [phi]_j^2 never overflows.
    std::vector<double> log_raw(J);
    for (std::int64_t j = 1; j <= J; ++j) {
        const double lj = std::log(static_cast<double>(j));
        if (model.regime == Regime::EP)
            log_raw[j - 1] = -0.5 * (std::pow(static_cast<double>(j), 2.0 * model.p) - 1.0) - lj;
        else
            log_raw[j - 1] = -(model.p + 1.0) * lj;
    }
    double norm = 0.0;
    for (std::int64_t j = 1; j <= J; ++j) norm += std::exp(log_beta(model, j) + 2.0 * log_raw[j - 1]);
    const double log_scale = 0.5 * (std::log(slope_scale * model.r) - std::log(norm));

    SlopeSpec slope;
    slope.coeffs.resize(J);
    for (std::int64_t j = 1; j <= J; ++j) slope.coeffs[j - 1] = std::exp(log_raw[j - 1] + log_scale);
    slope.true_norm_beta_sq = 0.0;
    for (std::int64_t j = 1; j <= J; ++j) {
        const double c = slope.coeffs[j - 1];
        if (c != 0.0) slope.true_norm_beta_sq += std::exp(log_beta(model, j) + 2.0 * std::log(c));
    }
    return slope;
}

Dataset draw_dataset(const SimConfig& config, const SlopeSpec& slope) {
    config.validate();
    const std::int64_t n = config.n;
    const std::int64_t J = config.truncation();
    if (slope.coeffs.size() != J)
        throw InvalidArgument("slope length " + std::to_string(slope.coeffs.size()) +
                              " does not match truncation J = " + std::to_string(J));

    Eigen::VectorXd scale(J);
    for (std::int64_t j = 1; j <= J; ++j) scale[j - 1] = std::sqrt(gamma(config.model, j).value);

    std::mt19937_64 regressor_rng(mix_seed(config.seed));
    std::mt19937_64 noise_rng(mix_seed(config.seed ^ 0xA5A5A5A5A5A5A5A5ULL));
    std::normal_distribution<double> normal(0.0, 1.0);

    Dataset data;
    data.config = config;
    data.config.J = J;
    data.x.resize(n, J);
    for (std::int64_t i = 0; i < n; ++i)
        for (std::int64_t j = 0; j < J; ++j) data.x(i, j) = scale[j] * normal(regressor_rng);

    if (config.rotation != 0.0) {
        const double c = std::cos(config.rotation), s = std::sin(config.rotation);
        for (std::int64_t j = 0; j + 1 < J; j += 2) {
            const Eigen::VectorXd first = data.x.col(j);
            const Eigen::VectorXd second = data.x.col(j + 1);
            data.x.col(j) = c * first - s * second;
            data.x.col(j + 1) = s * first + c * second;
        }
    }

    data.y = data.x * slope.coeffs;
    normal.reset();
    for (std::int64_t i = 0; i < n; ++i) data.y[i] += config.sigma * normal(noise_rng);
    return data;
}

TrueValue true_value(const FunctionalSpec& spec, const SlopeSpec& slope, const SequenceModel& model) {
    validate(spec);
    const std::int64_t J = slope.coeffs.size();
    TrueValue out;
    for (std::int64_t j = 1; j <= J; ++j) out.value += coefficient(spec, j) * slope.coeffs[j - 1];
    try {
        out.tail_bound = std::sqrt(model.r * tail_sum(model, spec, J));
    } catch (const NumericalError&) {
        out.tail_bound = std::numeric_limits<double>::infinity();
    }
    return out;
}

std::string format_double(double value) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    if (ec != std::errc()) throw NumericalError("cannot format double");
    return std::string(buf, ptr);
}

void write_dataset_csv(std::ostream& out, const Dataset& data) {
    out << "y";
    for (std::int64_t j = 1; j <= data.dim(); ++j) out << ",x" << j;
    out << '\n';
    for (std::int64_t i = 0; i < data.n(); ++i) {
        out << format_double(data.y[i]);
        for (std::int64_t j = 0; j < data.dim(); ++j) out << ',' << format_double(data.x(i, j));
        out << '\n';
    }
}

void write_dataset_csv(const std::string& path, const Dataset& data) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InvalidArgument("cannot open '" + path + "' for writing");
    write_dataset_csv(out, data);
    if (!out) throw InvalidArgument("failed writing '" + path + "'");
}

Dataset read_dataset_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw InvalidArgument("dataset CSV is empty");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::int64_t columns = 1;
    for (char c : line) columns += c == ',';
    if (line.rfind("y", 0) != 0 || columns < 2) throw InvalidArgument("dataset CSV header must be y,x1,...,xJ");

    std::vector<double> values;
    std::int64_t rows = 0;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const char* p = line.data();
        const char* end = p + line.size();
        std::int64_t fields = 0;
        while (true) {
            double v = 0.0;
            auto [next, ec] = std::from_chars(p, end, v);
            if (ec != std::errc() || !std::isfinite(v))
                throw InvalidArgument("bad number on data row " + std::to_string(rows + 1));
            values.push_back(v);
            ++fields;
            if (next == end) break;
            if (*next != ',') throw InvalidArgument("bad separator on data row " + std::to_string(rows + 1));
            p = next + 1;
        }
        if (fields != columns)
            throw InvalidArgument("data row " + std::to_string(rows + 1) + " has " + std::to_string(fields) +
                                  " fields, expected " + std::to_string(columns));
        ++rows;
    }
    if (rows == 0) throw InvalidArgument("dataset CSV has no data rows");

    Dataset data;
    data.y.resize(rows);
    data.x.resize(rows, columns - 1);
    for (std::int64_t i = 0; i < rows; ++i) {
        data.y[i] = values[i * columns];
        for (std::int64_t j = 1; j < columns; ++j) data.x(i, j - 1) = values[i * columns + j];
    }
    data.config.n = rows;
    data.config.J = columns - 1;
    return data;
}

Dataset read_dataset_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InvalidArgument("dataset not found: " + path);
    return read_dataset_csv(in);
}

}  // namespace flr
