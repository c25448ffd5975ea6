#include "flr/functionals.hpp"

#include <charconv>
#include <cmath>
#include <numbers>
#include <sstream>

#include "flr/error.hpp"

namespace flr {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kSqrt2 = std::numbers::sqrt2;

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};

// 2 pi * frac(k t): keeps trig arguments small for large k.
double phase(std::int64_t k, double t) {
    const double kt = static_cast<double>(k) * t;
    return 2.0 * kPi * (kt - std::floor(kt));
}

double parse_double(std::string_view text, const std::string& what) {
    double value = 0.0;
    const auto* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, value);
    if (ec != std::errc() || ptr != end)
        throw InvalidArgument("cannot parse " + what + " from '" + std::string(text) + "'");
    return value;
}

std::vector<std::string_view> split(std::string_view text, char sep) {
    std::vector<std::string_view> parts;
    std::size_t start = 0;
    while (true) {
        const auto pos = text.find(sep, start);
        parts.push_back(text.substr(start, pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return parts;
}

}  // namespace

double basis(std::int64_t j, double s) {
    if (j < 1) throw InvalidArgument("basis index must be >= 1");
    if (j == 1) return 1.0;
    const double x = phase(j / 2, s);
    return kSqrt2 * (j % 2 == 0 ? std::cos(x) : std::sin(x));
}

void validate(const FunctionalSpec& spec) {
    std::visit(overloaded{
                   [](const PointEval& f) {
                       if (!(f.t0 >= 0.0 && f.t0 <= 1.0))
                           throw InvalidArgument("point evaluation requires 0 <= t0 <= 1");
                   },
                   [](const DerivativeEval& f) {
                       if (!(f.t0 >= 0.0 && f.t0 <= 1.0))
                           throw InvalidArgument("derivative evaluation requires 0 <= t0 <= 1");
                       if (f.q < 0) throw InvalidArgument("derivative order q must be >= 0");
                   },
                   [](const LocalAverage& f) {
                       if (!(f.b > 0.0 && f.b <= 1.0))
                           throw InvalidArgument("local average requires 0 < b <= 1");
                   },
                   [](const Custom& f) {
                       if (f.coeffs.empty()) throw InvalidArgument("custom functional needs coefficients");
                       for (double c : f.coeffs)
                           if (!std::isfinite(c)) throw InvalidArgument("custom coefficients must be finite");
                   },
               },
               spec);
}

FunctionalSpec parse_functional(const std::string& text) {
    const auto parts = split(text, ':');
    const auto kind = parts.front();
    FunctionalSpec spec;
    if ((kind == "point" || kind == "pointeval") && parts.size() == 2) {
        spec = PointEval{parse_double(parts[1], "t0")};
    } else if ((kind == "deriv" || kind == "derivative") && parts.size() == 3) {
        const double q = parse_double(parts[2], "q");
        if (q != std::floor(q)) throw InvalidArgument("derivative order q must be an integer");
        spec = DerivativeEval{parse_double(parts[1], "t0"), static_cast<int>(q)};
    } else if ((kind == "avg" || kind == "average") && parts.size() == 2) {
        spec = LocalAverage{parse_double(parts[1], "b")};
    } else if (kind == "custom" && parts.size() == 2) {
        Custom c;
        for (auto item : split(parts[1], ',')) c.coeffs.push_back(parse_double(item, "coefficient"));
        spec = std::move(c);
    } else {
        throw InvalidArgument("unrecognized functional '" + text +
                              "' (expected point:T0, deriv:T0:Q, avg:B or custom:c1,c2,...)");
    }
    validate(spec);
    return spec;
}

std::string to_string(const FunctionalSpec& spec) {
    std::ostringstream out;
    const auto num = [](double v) {
        char buf[32];
        return std::string(buf, std::to_chars(buf, buf + sizeof(buf), v).ptr);
    };
    std::visit(overloaded{
                   [&](const PointEval& f) { out << "point:" << num(f.t0); },
                   [&](const DerivativeEval& f) { out << "deriv:" << num(f.t0) << ':' << f.q; },
                   [&](const LocalAverage& f) { out << "avg:" << num(f.b); },
                   [&](const Custom& f) {
                       out << "custom:";
                       for (std::size_t i = 0; i < f.coeffs.size(); ++i) out << (i ? "," : "") << num(f.coeffs[i]);
                   },
               },
               spec);
    return out.str();
}

double coefficient(const FunctionalSpec& spec, std::int64_t j) {
    if (j < 1) throw InvalidArgument("coefficient index must be >= 1");
    const std::int64_t k = j / 2;
    const bool even = j % 2 == 0;
    return std::visit(
        overloaded{
            [&](const PointEval& f) { return basis(j, f.t0); },
            [&](const DerivativeEval& f) {
                if (j == 1) return f.q == 0 ? 1.0 : 0.0;
                const double x = phase(k, f.t0);
                const double c = std::cos(x), s = std::sin(x);
                // d^q/ds^q of cos and sin: phase shift by q pi / 2.
                double shifted = 0.0;
                switch (f.q % 4) {
                    case 0: shifted = even ? c : s; break;
                    case 1: shifted = even ? -s : c; break;
                    case 2: shifted = even ? -c : -s; break;
                    case 3: shifted = even ? s : -c; break;
                }
                return kSqrt2 * std::pow(2.0 * kPi * static_cast<double>(k), f.q) * shifted;
            },
            [&](const LocalAverage& f) {
                if (j == 1) return 1.0;
                const double w = kPi * static_cast<double>(k) * f.b;
                if (even) return kSqrt2 * std::sin(2.0 * w) / (2.0 * w);
                const double s = std::sin(w);
                return kSqrt2 * s * s / w;  // (1 - cos 2w) / (2w) = sin^2 w / w
            },
            [&](const Custom& f) {
                return static_cast<std::size_t>(j) <= f.coeffs.size() ? f.coeffs[j - 1] : 0.0;
            },
        },
        spec);
}

Eigen::VectorXd coefficients(const FunctionalSpec& spec, std::int64_t m) {
    if (m < 1) throw InvalidArgument("coefficients requires m >= 1");
    Eigen::VectorXd out(m);
    for (std::int64_t j = 1; j <= m; ++j) out[j - 1] = coefficient(spec, j);
    return out;
}

double gram(const FunctionalSpec& spec, std::int64_t m) {
    if (m < 1) throw InvalidArgument("gram requires m >= 1");
    double sum = 0.0;
    for (std::int64_t j = 1; j <= m; ++j) {
        const double c = coefficient(spec, j);
        sum += c * c;
    }
    return sum;
}

std::optional<CoefficientProfile> coefficient_profile(const FunctionalSpec& spec) {
    return std::visit(
        overloaded{
            [](const PointEval&) -> std::optional<CoefficientProfile> { return CoefficientProfile{1.0, 2.0, 0.0}; },
            [](const DerivativeEval& f) -> std::optional<CoefficientProfile> {
                const double base = std::pow(kPi, 2.0 * f.q);
                return CoefficientProfile{base, 2.0 * base, static_cast<double>(f.q)};
            },
            [](const LocalAverage& f) -> std::optional<CoefficientProfile> {
                const double scale = 1.0 / (kPi * f.b * kPi * f.b);
                return CoefficientProfile{2.0 * scale, 18.0 * scale, -1.0};
            },
            [](const Custom&) -> std::optional<CoefficientProfile> { return std::nullopt; },
        },
        spec);
}

std::optional<double> decay_index(const FunctionalSpec& spec) {
    return std::visit(overloaded{
                          [](const PointEval&) -> std::optional<double> { return 0.0; },
                          [](const DerivativeEval& f) -> std::optional<double> { return -static_cast<double>(f.q); },
                          [](const LocalAverage&) -> std::optional<double> { return 1.0; },
                          [](const Custom&) -> std::optional<double> { return std::nullopt; },
                      },
                      spec);
}

}  // namespace flr
