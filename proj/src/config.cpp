#include "eve/config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace eve {

Dataset DataSpec::build() const {
    Rng rng(data_seed);
    Dataset ds;
    bool chronological;
    if (kind == "csv") {
        if (windowed) {
            // the whole table is the series; target_channel picks the
            // forecast column
            Dataset raw = load_csv(path, {}, header);
            WindowSpec spec{input_length, horizon, stride};
            ds = make_windows(raw.features, spec, target_channel);
            ds.name = raw.name;
        } else {
            ds = load_csv(path, target_columns, header);
        }
        chronological = split.empty() ? windowed : (split == "chronological");
    } else if (kind == "synth_tabular") {
        NoiseKind nk = noise == "heteroscedastic" ? NoiseKind::Heteroscedastic
                                                  : NoiseKind::Homoscedastic;
        if (noise != "homoscedastic" && noise != "heteroscedastic")
            throw std::invalid_argument("data: unknown noise kind '" + noise + "'");
        ds = synth_tabular(rng, n, d, nk, noise_std);
        chronological = split.empty() ? false : (split == "chronological");
    } else if (kind == "synth_ar") {
        Tensor series = synth_ar_sequence(rng, length, phi_true, noise_std);
        WindowSpec spec{input_length, horizon, stride};
        ds = make_windows(series, spec, 0);
        ds.name = "synth_ar";
        chronological = split.empty() ? true : (split == "chronological");
    } else {
        throw std::invalid_argument("data: unknown kind '" + kind + "'");
    }
    if (!name.empty()) ds.name = name;
    ds.splits = make_splits(ds.rows(), chronological, &rng);
    if (standardize_flag) standardize(ds);
    return ds;
}

namespace {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

class Parser {
public:
    Parser(const std::string& text, const std::string& origin)
        : origin_(origin) {
        std::stringstream ss(text);
        std::string line;
        while (std::getline(ss, line)) lines_.push_back(line);
    }

    void fail(std::size_t line_no, const std::string& msg) const {
        throw ConfigError(origin_ + ":" + std::to_string(line_no) + ": " + msg);
    }

    static std::string trim(const std::string& s) {
        std::size_t a = s.find_first_not_of(" \t\r");
        if (a == std::string::npos) return "";
        std::size_t b = s.find_last_not_of(" \t\r");
        return s.substr(a, b - a + 1);
    }

    template <typename Fn>
    void each(Fn&& on_kv) const {
        std::string section;
        for (std::size_t i = 0; i < lines_.size(); ++i) {
            std::string line = trim(lines_[i]);
            if (line.empty() || line[0] == '#') continue;
            if (line.front() == '[') {
                if (line.back() != ']')
                    fail(i + 1, "malformed section header '" + line + "'");
                section = line.substr(1, line.size() - 2);
                continue;
            }
            std::size_t eq = line.find('=');
            if (eq == std::string::npos)
                fail(i + 1, "expected 'key = value', got '" + line + "'");
            std::string key = trim(line.substr(0, eq));
            std::string value = trim(line.substr(eq + 1));
            if (key.empty()) fail(i + 1, "empty key");
            on_kv(section, key, value, i + 1);
        }
    }

private:
    std::string origin_;
    std::vector<std::string> lines_;
};

double to_double(const Parser& p, const std::string& v, std::size_t line) {
    try {
        std::size_t used;
        double x = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument("trailing");
        return x;
    } catch (...) {
        p.fail(line, "expected number, got '" + v + "'");
    }
    return 0;
}

long long to_int(const Parser& p, const std::string& v, std::size_t line) {
    try {
        std::size_t used;
        long long x = std::stoll(v, &used);
        if (used != v.size()) throw std::invalid_argument("trailing");
        return x;
    } catch (...) {
        p.fail(line, "expected integer, got '" + v + "'");
    }
    return 0;
}

bool to_bool(const Parser& p, const std::string& v, std::size_t line) {
    if (v == "true" || v == "on" || v == "1") return true;
    if (v == "false" || v == "off" || v == "0") return false;
    p.fail(line, "expected boolean, got '" + v + "'");
    return false;
}

std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ','))
        out.push_back(Parser::trim(item));
    return out;
}

}  // namespace

FullConfig parse_config_text(const std::string& text, const std::string& origin) {
    FullConfig cfg;
    Parser p(text, origin);
    bool tau_free_set = false;

    p.each([&](const std::string& section, const std::string& key,
               const std::string& value, std::size_t line) {
        auto unknown = [&] {
            p.fail(line, "unknown key '" + key + "' in section [" + section + "]");
        };
        if (section == "data") {
            DataSpec& d = cfg.data;
            if (key == "kind") d.kind = value;
            else if (key == "name") d.name = value;
            else if (key == "path") d.path = value;
            else if (key == "target_columns") {
                d.target_columns.clear();
                for (const auto& s : split_list(value))
                    d.target_columns.push_back(
                        static_cast<std::size_t>(to_int(p, s, line)));
            } else if (key == "header") d.header = to_bool(p, value, line);
            else if (key == "n") d.n = static_cast<std::size_t>(to_int(p, value, line));
            else if (key == "d") d.d = static_cast<std::size_t>(to_int(p, value, line));
            else if (key == "noise") d.noise = value;
            else if (key == "noise_std") d.noise_std = to_double(p, value, line);
            else if (key == "length") d.length = static_cast<std::size_t>(to_int(p, value, line));
            else if (key == "phi_true") d.phi_true = to_double(p, value, line);
            else if (key == "windowed") d.windowed = to_bool(p, value, line);
            else if (key == "input_length") d.input_length = static_cast<std::size_t>(to_int(p, value, line));
            else if (key == "horizon") d.horizon = static_cast<std::size_t>(to_int(p, value, line));
            else if (key == "stride") d.stride = static_cast<std::size_t>(to_int(p, value, line));
            else if (key == "target_channel") d.target_channel = static_cast<std::size_t>(to_int(p, value, line));
            else if (key == "standardize") d.standardize_flag = to_bool(p, value, line);
            else if (key == "split") d.split = value;
            else if (key == "seed") d.data_seed = static_cast<std::uint64_t>(to_int(p, value, line));
            else unknown();
        } else if (section == "layer") {
            LayerConfig& l = cfg.train.layer;
            if (key == "neurons") l.n_neurons = static_cast<std::size_t>(to_int(p, value, line));
            else if (key == "latent_dim") l.latent_dim = static_cast<std::size_t>(to_int(p, value, line));
            else if (key == "readout") {
                if (value == "means") l.readout_source = ReadoutSource::Means;
                else if (value == "samples") l.readout_source = ReadoutSource::Samples;
                else p.fail(line, "readout must be 'means' or 'samples'");
            } else if (key == "sigma_floor") l.sigma_floor = to_double(p, value, line);
            else if (key == "mc_samples") l.mc_samples = static_cast<int>(to_int(p, value, line));
            else if (key == "deterministic") cfg.train.deterministic_mode = to_bool(p, value, line);
            else unknown();
        } else if (section == "control") {
            ControlConfig& c = cfg.train.control;
            if (key == "regime") {
                try { c.regime = regime_from_name(value); }
                catch (const std::exception& e) { p.fail(line, e.what()); }
            } else if (key == "band_low") c.band_low = to_double(p, value, line);
            else if (key == "band_high") c.band_high = to_double(p, value, line);
            else if (key == "lambda_band") c.lambda_band = to_double(p, value, line);
            else if (key == "beta") c.beta = to_double(p, value, line);
            else if (key == "tau_free") { c.tau_free = to_double(p, value, line); tau_free_set = true; }
            else if (key == "kl_eff_in_loss") c.kl_eff_in_loss = to_bool(p, value, line);
            else if (key == "homeo_eta") c.homeo.eta = to_double(p, value, line);
            else if (key == "beta_min") c.homeo.beta_min = to_double(p, value, line);
            else if (key == "beta_max") c.homeo.beta_max = to_double(p, value, line);
            else if (key == "projection_per_epoch") c.projection_per_epoch = to_bool(p, value, line);
            else unknown();
        } else if (section == "ar") {
            ARConfig& a = cfg.train.ar;
            if (key == "enabled") a.enabled = to_bool(p, value, line);
            else if (key == "tau_time") a.tau_time = to_double(p, value, line);
            else if (key == "dt") a.dt = to_double(p, value, line);
            else if (key == "alpha") a.alpha = to_double(p, value, line);
            else if (key == "sigma_ar") a.sigma_ar = to_double(p, value, line);
            else unknown();
        } else if (section == "train") {
            TrainConfig& t = cfg.train;
            if (key == "epochs") t.epochs = static_cast<int>(to_int(p, value, line));
            else if (key == "batch_size") t.batch_size = static_cast<std::size_t>(to_int(p, value, line));
            else if (key == "optimizer") {
                if (value == "adam") t.opt.kind = OptimizerKind::Adam;
                else if (value == "adamw") t.opt.kind = OptimizerKind::AdamW;
                else p.fail(line, "optimizer must be 'adam' or 'adamw'");
            } else if (key == "lr") t.opt.lr = to_double(p, value, line);
            else if (key == "beta1") t.opt.beta1 = to_double(p, value, line);
            else if (key == "beta2") t.opt.beta2 = to_double(p, value, line);
            else if (key == "eps") t.opt.eps = to_double(p, value, line);
            else if (key == "weight_decay") t.opt.weight_decay = to_double(p, value, line);
            else if (key == "clip_norm") t.clip_norm = to_double(p, value, line);
            else if (key == "seeds") {
                t.seeds.clear();
                for (const auto& s : split_list(value))
                    t.seeds.push_back(static_cast<std::uint64_t>(to_int(p, s, line)));
            } else if (key == "shuffle") t.shuffle_each_epoch = to_bool(p, value, line);
            else if (key == "mc_eval_samples") t.mc_eval_samples = static_cast<int>(to_int(p, value, line));
            else if (key == "eps_collapse") t.eps_collapse = to_double(p, value, line);
            else if (key == "drift_window") t.drift_window = static_cast<int>(to_int(p, value, line));
            else unknown();
        } else if (section == "select") {
            if (key == "w_out") cfg.train.selection.w_out = to_double(p, value, line);
            else if (key == "w_kl") cfg.train.selection.w_kl = to_double(p, value, line);
            else unknown();
        } else if (section == "sweep") {
            SweepSpec& s = cfg.sweep;
            if (key == "k") {
                s.ks.clear();
                for (const auto& v : split_list(value))
                    s.ks.push_back(static_cast<std::size_t>(to_int(p, v, line)));
            } else if (key == "regimes") {
                s.regimes.clear();
                for (const auto& v : split_list(value)) {
                    try { s.regimes.push_back(regime_from_name(v)); }
                    catch (const std::exception& e) { p.fail(line, e.what()); }
                }
            } else if (key == "ar") {
                s.ar_flags.clear();
                for (const auto& v : split_list(value)) {
                    if (v == "on") s.ar_flags.push_back(true);
                    else if (v == "off") s.ar_flags.push_back(false);
                    else p.fail(line, "ar list entries must be 'on' or 'off'");
                }
            } else if (key == "seeds_per_cell") {
                s.seeds_per_cell = static_cast<std::size_t>(to_int(p, value, line));
            } else unknown();
        } else {
            p.fail(line, "unknown section [" + section + "]");
        }
    });

    // layer input width follows from the data description
    std::size_t d = cfg.data.kind == "synth_tabular" ? cfg.data.d
                    : cfg.data.kind == "synth_ar"    ? 1
                                                     : 0;
    if (d > 0) cfg.train.layer.input_dim = d;
    // free-bits default scales with the latent dimension
    if (!tau_free_set)
        cfg.train.control.tau_free =
            0.1 * static_cast<double>(cfg.train.layer.latent_dim);
    return cfg;
}

FullConfig parse_config_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open config file: " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_config_text(ss.str(), path);
}

}  // namespace eve
