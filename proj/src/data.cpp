#include "eve/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace eve {

void WindowSpec::validate() const {
    if (input_length < 1 || horizon < 1 || stride < 1)
        throw std::invalid_argument("window spec: L, H, stride must all be >= 1");
}

Tensor Dataset::gather_features(const std::vector<std::size_t>& idx) const {
    std::size_t width = features.shape[1];
    Tensor out({idx.size(), width});
    for (std::size_t r = 0; r < idx.size(); ++r) {
        if (idx[r] >= rows()) throw std::out_of_range("gather: row index");
        for (std::size_t c = 0; c < width; ++c)
            out[r * width + c] = features[idx[r] * width + c];
    }
    return out;
}

Tensor Dataset::gather_targets(const std::vector<std::size_t>& idx) const {
    std::size_t width = targets.shape[1];
    Tensor out({idx.size()});
    for (std::size_t r = 0; r < idx.size(); ++r)
        out[r] = targets[idx[r] * width];
    return out;
}

nlohmann::json Dataset::manifest() const {
    return nlohmann::json{
        {"name", name},
        {"rows", rows()},
        {"feat_dim", feat_dim},
        {"input_length", input_length},
        {"horizon", targets.shape.size() > 1 ? targets.shape[1] : 0},
        {"splits",
         {{"train", splits.train.size()},
          {"val", splits.val.size()},
          {"test", splits.test.size()}}},
        {"standardized", stats.applied},
        {"feat_mean", stats.feat_mean},
        {"feat_std", stats.feat_std},
        {"target_mean", stats.target_mean},
        {"target_std", stats.target_std}};
}

SplitIndices make_splits(std::size_t rows, bool chronological, Rng* rng,
                         double train_frac, double val_frac) {
    if (rows < 3) throw std::invalid_argument("make_splits: need >= 3 rows");
    std::vector<std::size_t> order(rows);
    for (std::size_t i = 0; i < rows; ++i) order[i] = i;
    if (!chronological) {
        if (rng == nullptr)
            throw std::invalid_argument("make_splits: shuffled split needs an rng");
        // Fisher-Yates with the artifact rng for reproducibility
        for (std::size_t i = rows - 1; i > 0; --i) {
            std::size_t j = static_cast<std::size_t>(rng->next_u64() % (i + 1));
            std::swap(order[i], order[j]);
        }
    }
    std::size_t n_train = std::max<std::size_t>(1, static_cast<std::size_t>(
                                                       rows * train_frac));
    std::size_t n_val = std::max<std::size_t>(
        1, static_cast<std::size_t>(rows * val_frac));
    if (n_train + n_val >= rows) {
        n_train = rows - 2;
        n_val = 1;
    }
    SplitIndices s;
    s.train.assign(order.begin(), order.begin() + n_train);
    s.val.assign(order.begin() + n_train, order.begin() + n_train + n_val);
    s.test.assign(order.begin() + n_train + n_val, order.end());
    return s;
}

Dataset load_csv(const std::string& path,
                 const std::vector<std::size_t>& target_columns,
                 bool has_header) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open csv: " + path);
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t line_no = 0;
    std::size_t width = 0;
    while (std::getline(f, line)) {
        ++line_no;
        if (line_no == 1 && has_header) continue;
        if (line.empty()) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        std::size_t col = 0;
        while (std::getline(ss, cell, ',')) {
            ++col;
            try {
                std::size_t used = 0;
                double v = std::stod(cell, &used);
                while (used < cell.size() && std::isspace(
                           static_cast<unsigned char>(cell[used])))
                    ++used;
                if (used != cell.size()) throw std::invalid_argument("trailing");
                row.push_back(v);
            } catch (const std::exception&) {
                throw std::runtime_error("csv: non-numeric cell at row " +
                                         std::to_string(line_no) + " col " +
                                         std::to_string(col) + " in " + path);
            }
        }
        if (width == 0) width = row.size();
        if (row.size() != width)
            throw std::runtime_error("csv: ragged row " + std::to_string(line_no) +
                                     " (" + std::to_string(row.size()) + " vs " +
                                     std::to_string(width) + " cells)");
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw std::runtime_error("csv: no data rows in " + path);
    for (auto t : target_columns)
        if (t >= width)
            throw std::runtime_error("csv: target column " + std::to_string(t) +
                                     " out of range (width " +
                                     std::to_string(width) + ")");

    std::vector<bool> is_target(width, false);
    for (auto t : target_columns) is_target[t] = true;
    std::size_t d = width - target_columns.size();
    if (d == 0) throw std::runtime_error("csv: no feature columns left");

    Dataset ds;
    ds.name = path;
    ds.feat_dim = d;
    ds.input_length = 1;
    ds.features = Tensor({rows.size(), d});
    ds.targets = Tensor({rows.size(), target_columns.size()});
    for (std::size_t r = 0; r < rows.size(); ++r) {
        std::size_t fc = 0, tc = 0;
        for (std::size_t c = 0; c < width; ++c) {
            if (is_target[c])
                ds.targets[r * target_columns.size() + tc++] = rows[r][c];
            else
                ds.features[r * d + fc++] = rows[r][c];
        }
    }
    return ds;
}

static void column_stats(const Tensor& mat, const std::vector<std::size_t>& rows,
                         std::vector<double>& mean, std::vector<double>& std) {
    std::size_t width = mat.shape[1];
    mean.assign(width, 0.0);
    std.assign(width, 0.0);
    for (auto r : rows)
        for (std::size_t c = 0; c < width; ++c) mean[c] += mat[r * width + c];
    for (auto& m : mean) m /= static_cast<double>(rows.size());
    for (auto r : rows)
        for (std::size_t c = 0; c < width; ++c) {
            double d = mat[r * width + c] - mean[c];
            std[c] += d * d;
        }
    for (auto& s : std)
        s = std::max(std::sqrt(s / static_cast<double>(rows.size())), 1e-8);
}

void standardize(Dataset& ds) {
    if (ds.splits.train.empty())
        throw std::invalid_argument("standardize: empty train split");
    if (ds.stats.applied) return;
    column_stats(ds.features, ds.splits.train, ds.stats.feat_mean,
                 ds.stats.feat_std);
    column_stats(ds.targets, ds.splits.train, ds.stats.target_mean,
                 ds.stats.target_std);
    std::size_t fw = ds.features.shape[1], tw = ds.targets.shape[1];
    for (std::size_t r = 0; r < ds.rows(); ++r) {
        for (std::size_t c = 0; c < fw; ++c)
            ds.features[r * fw + c] =
                (ds.features[r * fw + c] - ds.stats.feat_mean[c]) /
                ds.stats.feat_std[c];
        for (std::size_t c = 0; c < tw; ++c)
            ds.targets[r * tw + c] =
                (ds.targets[r * tw + c] - ds.stats.target_mean[c]) /
                ds.stats.target_std[c];
    }
    ds.stats.applied = true;
}

double unstandardize_target(const Dataset& ds, double value, std::size_t col) {
    if (!ds.stats.applied) return value;
    return value * ds.stats.target_std[col] + ds.stats.target_mean[col];
}

std::size_t window_count(std::size_t series_len, const WindowSpec& spec) {
    spec.validate();
    if (series_len < spec.input_length + spec.horizon) return 0;
    return (series_len - spec.input_length - spec.horizon) / spec.stride + 1;
}

Dataset make_windows(const Tensor& series, const WindowSpec& spec,
                     std::size_t target_channel) {
    spec.validate();
    if (series.shape.size() != 2)
        throw std::invalid_argument("make_windows: series must be (T, d)");
    std::size_t len = series.shape[0], d = series.shape[1];
    if (target_channel >= d)
        throw std::invalid_argument("make_windows: target channel out of range");
    std::size_t n = window_count(len, spec);
    if (n == 0)
        throw std::invalid_argument("make_windows: series too short for L + H");

    Dataset ds;
    ds.name = "windows";
    ds.feat_dim = d;
    ds.input_length = spec.input_length;
    std::size_t fw = spec.input_length * d;
    ds.features = Tensor({n, fw});
    ds.targets = Tensor({n, spec.horizon});
    for (std::size_t wi = 0; wi < n; ++wi) {
        std::size_t start = wi * spec.stride;
        for (std::size_t t = 0; t < spec.input_length; ++t)
            for (std::size_t c = 0; c < d; ++c)
                ds.features[wi * fw + t * d + c] = series[(start + t) * d + c];
        for (std::size_t h = 0; h < spec.horizon; ++h)
            ds.targets[wi * spec.horizon + h] =
                series[(start + spec.input_length + h) * d + target_channel];
    }
    return ds;
}

Dataset synth_tabular(Rng& rng, std::size_t n, std::size_t d, NoiseKind kind,
                      double noise_std) {
    if (n < 1 || d < 1)
        throw std::invalid_argument("synth_tabular: n, d must be >= 1");
    Dataset ds;
    ds.name = "synth_tabular";
    ds.feat_dim = d;
    ds.input_length = 1;
    ds.features = Tensor({n, d});
    ds.targets = Tensor({n, 1});
    // fixed generating weights: w*_j = sin(j+1), b* = 0.5
    std::vector<double> w_true(d);
    for (std::size_t j = 0; j < d; ++j) w_true[j] = std::sin(static_cast<double>(j + 1));
    const double b_true = 0.5;
    for (std::size_t r = 0; r < n; ++r) {
        double y = b_true, norm2 = 0.0;
        for (std::size_t c = 0; c < d; ++c) {
            double x = rng.normal();
            ds.features[r * d + c] = x;
            y += w_true[c] * x;
            norm2 += x * x;
        }
        double std_here = noise_std;
        if (kind == NoiseKind::Heteroscedastic)
            std_here = noise_std * (0.25 + std::sqrt(norm2));
        ds.targets[r] = y + std_here * rng.normal();
    }
    return ds;
}

Tensor synth_ar_sequence(Rng& rng, std::size_t length, double phi_true,
                         double noise_std, double s0) {
    if (std::fabs(phi_true) >= 1.0)
        throw std::invalid_argument("synth_ar_sequence: |phi| must be < 1");
    Tensor s({length, 1});
    double prev = s0;
    if (length > 0) s[0] = s0;
    for (std::size_t t = 1; t < length; ++t) {
        prev = phi_true * prev + noise_std * rng.normal();
        s[t] = prev;
    }
    return s;
}

}  // namespace eve
