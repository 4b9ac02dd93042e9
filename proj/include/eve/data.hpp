#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "eve/rng.hpp"
#include "eve/tensor.hpp"

#include "json.hpp"

namespace eve {

struct SplitIndices {
    std::vector<std::size_t> train, val, test;
};

struct Standardization {
    std::vector<double> feat_mean, feat_std;      // per feature column
    std::vector<double> target_mean, target_std;  // per target column
    bool applied = false;
};

enum class NoiseKind { Homoscedastic, Heteroscedastic };

struct WindowSpec {
    std::size_t input_length = 24;  // L
    std::size_t horizon = 6;        // H
    std::size_t stride = 1;

    void validate() const;
};

// Tabular or windowed dataset. For windowed data, each row holds a
// flattened (input_length x feat_dim) window, time-major.
struct Dataset {
    std::string name = "dataset";
    Tensor features;  // (rows, input_length * feat_dim)
    Tensor targets;   // (rows, horizon)
    std::size_t feat_dim = 0;
    std::size_t input_length = 1;
    SplitIndices splits;
    Standardization stats;

    std::size_t rows() const { return features.shape.empty() ? 0 : features.shape[0]; }
    bool sequential() const { return input_length > 1; }

    // Rows gathered by index. Feature batch is (B, L*d); target batch is
    // the first horizon column, (B).
    Tensor gather_features(const std::vector<std::size_t>& idx) const;
    Tensor gather_targets(const std::vector<std::size_t>& idx) const;

    nlohmann::json manifest() const;
};

// Chronological (series) or seeded-shuffle (tabular) 70/15/15 split.
SplitIndices make_splits(std::size_t rows, bool chronological, Rng* rng,
                         double train_frac = 0.70, double val_frac = 0.15);

// target_columns select targets by index; remaining columns are features.
Dataset load_csv(const std::string& path,
                 const std::vector<std::size_t>& target_columns,
                 bool has_header);

// Z-scores features and targets with train-split statistics only
// (std floor 1e-8); records the inverse transform in stats.
void standardize(Dataset& ds);
double unstandardize_target(const Dataset& ds, double value, std::size_t col = 0);

// Sliding windows over a (T, d) series; the target channel's next
// `horizon` values follow each window.
Dataset make_windows(const Tensor& series, const WindowSpec& spec,
                     std::size_t target_channel = 0);
std::size_t window_count(std::size_t series_len, const WindowSpec& spec);

// y = w* . x + b* + eps with a fixed documented weight vector.
Dataset synth_tabular(Rng& rng, std::size_t n, std::size_t d, NoiseKind kind,
                      double noise_std = 0.1);

// AR(1) series s_t = phi_true s_{t-1} + eps_t starting from s_0, shape (T, 1).
Tensor synth_ar_sequence(Rng& rng, std::size_t length, double phi_true,
                         double noise_std, double s0 = 0.0);

}  // namespace eve
