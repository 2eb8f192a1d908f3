#include "dve/analysis/gmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "dve/rng.hpp"
#include "dve/textio.hpp"

namespace dve::analysis {

std::size_t gmm_parameter_count(std::size_t C, std::size_t d) { return (C - 1) + 2 * C * d; }

double aic_score(const GmmFit& fit) { return 2.0 * static_cast<double>(fit.n_params) - 2.0 * fit.log_likelihood; }

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

double log_sum_exp(std::span<const double> v) {
    const double m = *std::max_element(v.begin(), v.end());
    if (!std::isfinite(m)) return m;
    double s = 0.0;
    for (double x : v) s += std::exp(x - m);
    return m + std::log(s);
}

/// Per-component log(p_k N(x_i | mu_k, sigma_k^2)) into `out` [C].
void component_log_densities(const GmmFit& f, const double* x, std::vector<double>& out) {
    const std::size_t C = f.n_components, d = f.dim;
    for (std::size_t k = 0; k < C; ++k) {
        double lp = std::log(f.weights[k]);
        for (std::size_t j = 0; j < d; ++j) {
            const double var = f.variances[k * d + j];
            const double diff = x[j] - f.means[k * d + j];
            lp -= 0.5 * (kLog2Pi + std::log(var) + diff * diff / var);
        }
        out[k] = lp;
    }
}

struct Moments {
    std::vector<double> mean, var;
};

Moments global_moments(std::span<const double> data, std::size_t n, std::size_t d, double floor) {
    Moments m{std::vector<double>(d, 0.0), std::vector<double>(d, 0.0)};
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) m.mean[j] += data[i * d + j];
    for (auto& v : m.mean) v /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) {
            const double diff = data[i * d + j] - m.mean[j];
            m.var[j] += diff * diff;
        }
    for (auto& v : m.var) v = std::max(v / static_cast<double>(n), floor);
    return m;
}

GmmFit kmeanspp_init(std::span<const double> data, std::size_t n, std::size_t d, std::size_t C, const Moments& gm,
                     Rng& rng) {
    GmmFit f;
    f.n_components = C;
    f.dim = d;
    f.weights.assign(C, 1.0 / static_cast<double>(C));
    f.means.assign(C * d, 0.0);
    f.variances.assign(C * d, 0.0);
    std::vector<double> dist(n, std::numeric_limits<double>::infinity());
    std::size_t pick = rng.uniform_int(n);
    for (std::size_t k = 0; k < C; ++k) {
        if (k > 0) {
            double total = 0.0;
            for (double v : dist) total += v;
            pick = total > 0.0 ? rng.categorical(dist) : rng.uniform_int(n);
        }
        for (std::size_t j = 0; j < d; ++j) {
            f.means[k * d + j] = data[pick * d + j];
            f.variances[k * d + j] = gm.var[j];
        }
        for (std::size_t i = 0; i < n; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
                const double diff = data[i * d + j] - f.means[k * d + j];
                s += diff * diff;
            }
            dist[i] = std::min(dist[i], s);
        }
    }
    return f;
}

void run_em(GmmFit& f, std::span<const double> data, std::size_t n, const Moments& gm, const EmConfig& cfg, Rng& rng) {
    const std::size_t C = f.n_components, d = f.dim;
    std::vector<double> resp(n * C), lp(C), nk(C);
    double prev = -std::numeric_limits<double>::infinity();
    f.ll_trace.clear();
    f.converged = false;
    for (std::size_t it = 0; it < cfg.max_iter; ++it) {
        // E-step; the log-likelihood belongs to the parameters before the M-step.
        double ll = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            component_log_densities(f, &data[i * d], lp);
            const double lse = log_sum_exp(lp);
            ll += lse;
            for (std::size_t k = 0; k < C; ++k) resp[i * C + k] = std::exp(lp[k] - lse);
        }
        if (it > 0) f.ll_trace.push_back(ll);
        f.log_likelihood = ll;
        f.iterations = it;
        if (it > 0 && ll - prev < cfg.tol * (1.0 + std::abs(ll))) {
            f.converged = true;
            return;
        }
        prev = ll;

        // M-step.
        std::fill(nk.begin(), nk.end(), 0.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t k = 0; k < C; ++k) nk[k] += resp[i * C + k];
        for (std::size_t k = 0; k < C; ++k) {
            double* mu = &f.means[k * d];
            double* var = &f.variances[k * d];
            if (nk[k] < std::min(cfg.min_count, static_cast<double>(n) / static_cast<double>(C))) {
                const std::size_t pick = rng.uniform_int(n);
                for (std::size_t j = 0; j < d; ++j) {
                    mu[j] = data[pick * d + j];
                    var[j] = gm.var[j];
                }
                nk[k] = 1.0;
                continue;
            }
            std::fill(mu, mu + d, 0.0);
            for (std::size_t i = 0; i < n; ++i) {
                const double r = resp[i * C + k];
                for (std::size_t j = 0; j < d; ++j) mu[j] += r * data[i * d + j];
            }
            for (std::size_t j = 0; j < d; ++j) mu[j] /= nk[k];
            std::fill(var, var + d, 0.0);
            for (std::size_t i = 0; i < n; ++i) {
                const double r = resp[i * C + k];
                for (std::size_t j = 0; j < d; ++j) {
                    const double diff = data[i * d + j] - mu[j];
                    var[j] += r * diff * diff;
                }
            }
            for (std::size_t j = 0; j < d; ++j) var[j] = std::max(var[j] / nk[k], cfg.var_floor);
        }
        double total = 0.0;
        for (double v : nk) total += v;
        for (std::size_t k = 0; k < C; ++k) f.weights[k] = nk[k] / total;
    }
    // Out of iterations: report the likelihood of the final parameters.
    f.log_likelihood = gmm_log_likelihood(f, data);
    f.ll_trace.push_back(f.log_likelihood);
}

}  // namespace

double gmm_log_likelihood(const GmmFit& fit, std::span<const double> data) {
    const std::size_t d = fit.dim;
    if (d == 0 || data.size() % d != 0) throw std::invalid_argument("gmm_log_likelihood: data width differs from the fit");
    std::vector<double> lp(fit.n_components);
    double ll = 0.0;
    for (std::size_t i = 0; i < data.size() / d; ++i) {
        component_log_densities(fit, &data[i * d], lp);
        ll += log_sum_exp(lp);
    }
    return ll;
}

GmmFit em_fit(std::span<const double> data, std::size_t n, std::size_t d, std::size_t C, const EmConfig& cfg,
              std::uint64_t seed) {
    if (C == 0 || d == 0) throw std::invalid_argument("em_fit: need C >= 1 and d >= 1");
    if (n <= C) throw std::invalid_argument("em_fit: need more points than components (n=" + std::to_string(n) +
                                            ", C=" + std::to_string(C) + ")");
    if (data.size() != n * d) throw std::invalid_argument("em_fit: data size is not n x d");
    for (double v : data)
        if (!std::isfinite(v)) throw std::invalid_argument("em_fit: non-finite data");
    const Moments gm = global_moments(data, n, d, cfg.var_floor);
    GmmFit best;
    bool have = false;
    for (std::size_t r = 0; r < std::max<std::size_t>(cfg.restarts, 1); ++r) {
        Rng rng(derive_seed(seed, "em-restart", r));
        GmmFit f = kmeanspp_init(data, n, d, C, gm, rng);
        run_em(f, data, n, gm, cfg, rng);
        if (!have || f.log_likelihood > best.log_likelihood) {
            best = std::move(f);
            have = true;
        }
    }
    best.n_params = gmm_parameter_count(C, d);
    best.aic = aic_score(best);
    return best;
}

ClusterSelection select_num_clusters(std::span<const double> data, std::size_t n, std::size_t d, std::size_t C_max,
                                     const EmConfig& cfg, std::uint64_t seed) {
    if (C_max == 0 || C_max >= n) throw std::invalid_argument("select_num_clusters: need 1 <= C_max < N");
    if (data.size() != n * d) throw std::invalid_argument("select_num_clusters: data size is not n x d");
    bool varied = false;
    for (std::size_t i = 1; i < n && !varied; ++i)
        for (std::size_t j = 0; j < d; ++j)
            if (data[i * d + j] != data[j]) {
                varied = true;
                break;
            }
    if (!varied) throw std::invalid_argument("select_num_clusters: degenerate matrix (all rows identical)");

    ClusterSelection sel;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t C = 1; C <= C_max; ++C) {
        GmmFit f = em_fit(data, n, d, C, cfg, derive_seed(seed, "components", C));
        const double a = f.aic / static_cast<double>(n);
        sel.aic_per_point.push_back(a);
        if (a < best) {
            best = a;
            sel.best = C;
        }
        sel.fits.push_back(std::move(f));
    }
    return sel;
}

std::string serialize_gmm(const GmmFit& fit) {
    std::ostringstream out;
    out << "dve-gmm 1\n";
    out << "components " << fit.n_components << '\n';
    out << "dim " << fit.dim << '\n';
    out << "log_likelihood " << textio::exact(fit.log_likelihood) << '\n';
    out << "aic " << textio::exact(fit.aic) << '\n';
    out << "n_params " << fit.n_params << '\n';
    out << "weights " << textio::join_exact(fit.weights) << '\n';
    out << "means " << textio::join_exact(fit.means) << '\n';
    out << "variances " << textio::join_exact(fit.variances) << '\n';
    out << "end\n";
    return out.str();
}

GmmFit parse_gmm(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != "dve-gmm 1") throw std::runtime_error("gmm: missing 'dve-gmm 1' header");
    GmmFit f;
    auto rest = [](const std::string& l, const std::string& key) {
        if (l.compare(0, key.size() + 1, key + " ") != 0) throw std::runtime_error("gmm: expected '" + key + "'");
        return l.substr(key.size() + 1);
    };
    auto next = [&](const std::string& key) {
        if (!std::getline(in, line)) throw std::runtime_error("gmm: unexpected end of text");
        return rest(line, key);
    };
    f.n_components = std::stoul(next("components"));
    f.dim = std::stoul(next("dim"));
    f.log_likelihood = textio::parse_double(next("log_likelihood"));
    f.aic = textio::parse_double(next("aic"));
    f.n_params = std::stoul(next("n_params"));
    f.weights = textio::split_doubles(next("weights"));
    f.means = textio::split_doubles(next("means"));
    f.variances = textio::split_doubles(next("variances"));
    if (!std::getline(in, line) || line != "end") throw std::runtime_error("gmm: missing 'end'");
    const std::size_t C = f.n_components, d = f.dim;
    if (f.weights.size() != C || f.means.size() != C * d || f.variances.size() != C * d) {
        throw std::runtime_error("gmm: array lengths do not match components x dim");
    }
    return f;
}

}  // namespace dve::analysis
