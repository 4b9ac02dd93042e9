#include "eve/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace eve {

BandOccupancy band_occupancy(const std::vector<double>& per_neuron_energy,
                             double ell, double u) {
    if (per_neuron_energy.empty())
        throw std::invalid_argument("band_occupancy: empty energy vector");
    std::size_t low = 0, high = 0;
    for (double e : per_neuron_energy) {
        if (e < ell) ++low;
        else if (e > u) ++high;
    }
    double n = static_cast<double>(per_neuron_energy.size());
    BandOccupancy o;
    o.frac_low = static_cast<double>(low) / n;
    o.frac_high = static_cast<double>(high) / n;
    o.inside_mass = static_cast<double>(per_neuron_energy.size() - low - high) / n;
    o.out = o.frac_low + o.frac_high;
    return o;
}

double reparam_proxy(const Tensor& z, const Tensor& mu, std::size_t k) {
    if (!same_shape(z, mu))
        throw std::invalid_argument("reparam_proxy: shape mismatch");
    if (z.shape.size() == 3 && z.shape[2] != k)
        throw std::invalid_argument("reparam_proxy: latent dim mismatch");
    if (z.size() == 0) return 0.0;
    double s = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) s += std::fabs(z[i] - mu[i]);
    // total / (B*N*k) == mean over batch and neurons of ||z-mu||_1 / k
    return s / static_cast<double>(z.size());
}

double collapse_fraction(const std::vector<double>& per_neuron_kl,
                         double eps_collapse) {
    if (eps_collapse <= 0.0)
        throw std::invalid_argument("collapse_fraction: eps must be > 0");
    if (per_neuron_kl.empty()) return 0.0;
    std::size_t c = 0;
    for (double v : per_neuron_kl)
        if (v < eps_collapse) ++c;
    return static_cast<double>(c) / static_cast<double>(per_neuron_kl.size());
}

double drift(const std::vector<double>& mu2_history, int window) {
    if (mu2_history.size() < 2) return 0.0;
    if (window < 1) throw std::invalid_argument("drift: window must be >= 1");
    double current = mu2_history.back();
    std::size_t avail = mu2_history.size() - 1;
    std::size_t w = std::min<std::size_t>(static_cast<std::size_t>(window), avail);
    double mean = 0.0;
    for (std::size_t i = mu2_history.size() - 1 - w; i < mu2_history.size() - 1; ++i)
        mean += mu2_history[i];
    mean /= static_cast<double>(w);
    return std::fabs(current - mean) / (mean + 1e-8);
}

// Regularized incomplete beta I_x(a,b) via the continued fraction of
// Lentz; standard route to the Student-t CDF.
static double betacf(double a, double b, double x) {
    const int max_iter = 300;
    const double tiny = 1e-300;
    const double eps = 1e-15;
    double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0, d = 1.0 - qab * x / qap;
    if (std::fabs(d) < tiny) d = tiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= max_iter; ++m) {
        int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < eps) break;
    }
    return h;
}

static double incbeta(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                      a * std::log(x) + b * std::log(1.0 - x);
    double front = std::exp(ln_front);
    if (x < (a + 1.0) / (a + b + 2.0))
        return front * betacf(a, b, x) / a;
    return 1.0 - front * betacf(b, a, 1.0 - x) / b;
}

double student_t_two_sided_p(double t, double dof) {
    if (dof <= 0.0) throw std::invalid_argument("student_t: dof must be > 0");
    double x = dof / (dof + t * t);
    return incbeta(dof / 2.0, 0.5, x);
}

PearsonResult pearson(const std::vector<double>& xs,
                      const std::vector<double>& ys) {
    if (xs.size() != ys.size())
        throw std::invalid_argument("pearson: length mismatch");
    std::size_t n = xs.size();
    if (n < 3) throw std::invalid_argument("pearson: need at least 3 points");
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double dx = xs[i] - mx, dy = ys[i] - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if (sxx == 0.0 || syy == 0.0)
        throw std::invalid_argument("pearson: degenerate (zero variance) input");
    PearsonResult res;
    res.n = n;
    res.r = sxy / std::sqrt(sxx * syy);
    double r = std::clamp(res.r, -1.0, 1.0);
    if (std::fabs(r) >= 1.0) {
        res.p = 0.0;
        return res;
    }
    double dof = static_cast<double>(n - 2);
    double t = r * std::sqrt(dof / (1.0 - r * r));
    res.p = student_t_two_sided_p(t, dof);
    return res;
}

double selection_score(double val_mse, double out, double kl_eff_norm,
                       double w_out, double w_kl) {
    if (w_out < 0.0 || w_kl < 0.0)
        throw std::invalid_argument("selection_score: weights must be >= 0");
    return val_mse * (1.0 + w_out * out + w_kl * kl_eff_norm);
}

nlohmann::json EpochDiagnostics::to_json() const {
    return nlohmann::json{{"epoch", epoch},
                          {"train_loss", train_loss},
                          {"task", task},
                          {"kl_term", kl_term},
                          {"band_term", band_term},
                          {"ar_term", ar_term},
                          {"val_mse", val_mse},
                          {"kl_mean", kl_mean},
                          {"kl_eff", kl_eff},
                          {"mu2_bar", mu2_bar},
                          {"energy_min", energy_min},
                          {"energy_median", energy_median},
                          {"energy_max", energy_max},
                          {"frac_low", frac_low},
                          {"frac_high", frac_high},
                          {"inside_mass", inside_mass},
                          {"out", out},
                          {"reparam_proxy", reparam_proxy},
                          {"collapse_fraction", collapse_fraction},
                          {"drift", drift},
                          {"ar_share", ar_share},
                          {"beta", beta},
                          {"grad_norm", grad_norm},
                          {"projection_events", projection_events},
                          {"projection_mean_abs_correction",
                           projection_mean_abs_correction},
                          {"selection_score", selection_score}};
}

EpochDiagnostics EpochDiagnostics::from_json(const nlohmann::json& j) {
    EpochDiagnostics d;
    d.epoch = j.at("epoch");
    d.train_loss = j.at("train_loss");
    d.task = j.at("task");
    d.kl_term = j.at("kl_term");
    d.band_term = j.at("band_term");
    d.ar_term = j.at("ar_term");
    d.val_mse = j.at("val_mse");
    d.kl_mean = j.at("kl_mean");
    d.kl_eff = j.at("kl_eff");
    d.mu2_bar = j.at("mu2_bar");
    d.energy_min = j.at("energy_min");
    d.energy_median = j.at("energy_median");
    d.energy_max = j.at("energy_max");
    d.frac_low = j.at("frac_low");
    d.frac_high = j.at("frac_high");
    d.inside_mass = j.at("inside_mass");
    d.out = j.at("out");
    d.reparam_proxy = j.at("reparam_proxy");
    d.collapse_fraction = j.at("collapse_fraction");
    d.drift = j.at("drift");
    d.ar_share = j.at("ar_share");
    d.beta = j.at("beta");
    d.grad_norm = j.at("grad_norm");
    d.projection_events = j.at("projection_events");
    d.projection_mean_abs_correction = j.at("projection_mean_abs_correction");
    d.selection_score = j.at("selection_score");
    return d;
}

nlohmann::json RunRecord::to_json() const {
    nlohmann::json eps = nlohmann::json::array();
    for (const auto& e : epochs) eps.push_back(e.to_json());
    return nlohmann::json{{"config", config},
                          {"dataset", dataset_name},
                          {"seed", seed},
                          {"epochs", eps},
                          {"best_epoch", best_epoch},
                          {"val_mse", val_mse},
                          {"test_mse", test_mse},
                          {"test_mae", test_mae},
                          {"test_crps", test_crps},
                          {"test_pinball", test_pinball},
                          {"final_out", final_out},
                          {"completed", completed},
                          {"aborted", aborted},
                          {"abort_reason", abort_reason}};
}

RunRecord RunRecord::from_json(const nlohmann::json& j) {
    RunRecord r;
    r.config = j.at("config");
    r.dataset_name = j.at("dataset");
    r.seed = j.at("seed");
    for (const auto& e : j.at("epochs"))
        r.epochs.push_back(EpochDiagnostics::from_json(e));
    r.best_epoch = j.at("best_epoch");
    r.val_mse = j.at("val_mse");
    r.test_mse = j.at("test_mse");
    r.test_mae = j.at("test_mae");
    r.test_crps = j.at("test_crps");
    r.test_pinball = j.at("test_pinball");
    r.final_out = j.at("final_out");
    r.completed = j.at("completed");
    r.aborted = j.at("aborted");
    r.abort_reason = j.at("abort_reason");
    return r;
}

void RunRecord::save(const std::string& path) const {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write run record: " + path);
    f << to_json().dump(2) << "\n";
}

RunRecord RunRecord::load(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot read run record: " + path);
    nlohmann::json j;
    f >> j;
    return from_json(j);
}

}  // namespace eve
