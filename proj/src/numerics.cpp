#include "saivla/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "saivla/errors.hpp"

namespace saivla {

namespace {
constexpr double kProbTol = 1e-6;
constexpr double kKlFloor = 1e-12;

void check_prob(const std::vector<double>& p, const char* what) {
    double sum = 0.0;
    for (double v : p) {
        if (!(v >= 0.0) || v > 1.0 + kProbTol) {
            throw InvalidArgument(std::string(what) + ": entry outside [0,1]");
        }
        sum += v;
    }
    if (std::abs(sum - 1.0) > kProbTol) {
        throw InvalidArgument(std::string(what) + ": probabilities do not sum to 1");
    }
}
}  // namespace

bool ProbVector3::normalized(double tol) const {
    if (p_minus < 0.0 || p_zero < 0.0 || p_plus < 0.0) return false;
    return std::abs(p_minus + p_zero + p_plus - 1.0) <= tol;
}

ProbVector3 make_prob3(double pm, double pz, double pp) {
    ProbVector3 p{pm, pz, pp};
    if (!p.normalized()) throw InvalidArgument("make_prob3: not a probability vector");
    return p;
}

std::vector<double> softmax_temp(const std::vector<double>& logits, double tau) {
    if (!(tau > 0.0) || !std::isfinite(tau)) {
        throw InvalidArgument("softmax_temp: tau must be positive and finite");
    }
    if (logits.empty()) throw InvalidArgument("softmax_temp: empty logits");
    double mx = -std::numeric_limits<double>::infinity();
    for (double v : logits) {
        if (!std::isfinite(v)) throw InvalidArgument("softmax_temp: non-finite logit");
        mx = std::max(mx, v);
    }
    std::vector<double> out(logits.size());
    double denom = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp((logits[i] - mx) / tau);
        denom += out[i];
    }
    for (double& v : out) v /= denom;
    return out;
}

ProbVector3 softmax_temp3(const std::array<double, 3>& logits, double tau) {
    std::vector<double> p = softmax_temp({logits[0], logits[1], logits[2]}, tau);
    return ProbVector3{p[0], p[1], p[2]};
}

std::vector<double> layer_norm(const std::vector<double>& x,
                               const std::vector<double>& gamma,
                               const std::vector<double>& beta, double eps) {
    if (x.size() != gamma.size() || x.size() != beta.size()) {
        throw InvalidArgument("layer_norm: length mismatch");
    }
    if (!(eps > 0.0)) throw InvalidArgument("layer_norm: eps must be positive");
    const std::size_t n = x.size();
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double v : x) var += (v - mean) * (v - mean);
    var /= static_cast<double>(n);
    const double inv = 1.0 / std::sqrt(var + eps);
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = gamma[i] * (x[i] - mean) * inv + beta[i];
    }
    return out;
}

void layer_norm_rows(Matrix& m, const std::vector<double>& gamma,
                     const std::vector<double>& beta, double eps) {
    if (m.cols != gamma.size() || m.cols != beta.size()) {
        throw InvalidArgument("layer_norm_rows: gamma/beta length mismatch");
    }
    if (!(eps > 0.0)) throw InvalidArgument("layer_norm_rows: eps must be positive");
    for (std::size_t r = 0; r < m.rows; ++r) {
        double* row = m.row(r);
        double mean = 0.0;
        for (std::size_t j = 0; j < m.cols; ++j) mean += row[j];
        mean /= static_cast<double>(m.cols);
        double var = 0.0;
        for (std::size_t j = 0; j < m.cols; ++j) var += (row[j] - mean) * (row[j] - mean);
        var /= static_cast<double>(m.cols);
        const double inv = 1.0 / std::sqrt(var + eps);
        for (std::size_t j = 0; j < m.cols; ++j) {
            row[j] = gamma[j] * (row[j] - mean) * inv + beta[j];
        }
    }
}

double entropy(const std::vector<double>& p) {
    check_prob(p, "entropy");
    double h = 0.0;
    for (double v : p) {
        if (v > 0.0) h -= v * std::log(v);
    }
    return h;
}

double entropy(const ProbVector3& p) {
    return entropy(std::vector<double>{p.p_minus, p.p_zero, p.p_plus});
}

double kl_div(const std::vector<double>& p, const std::vector<double>& q) {
    if (p.size() != q.size()) throw InvalidArgument("kl_div: length mismatch");
    double d = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] > 0.0) {
            d += p[i] * std::log(p[i] / std::max(q[i], kKlFloor));
        }
    }
    return d;
}

double kl_div(const ProbVector3& p, const ProbVector3& q) {
    return kl_div(std::vector<double>{p.p_minus, p.p_zero, p.p_plus},
                  std::vector<double>{q.p_minus, q.p_zero, q.p_plus});
}

double sigmoid(double x) {
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

}  // namespace saivla
