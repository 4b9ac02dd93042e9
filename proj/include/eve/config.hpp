#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "eve/data.hpp"
#include "eve/trainer.hpp"

namespace eve {

// Dataset source description from the [data] config section.
struct DataSpec {
    std::string kind = "synth_tabular";  // csv | synth_tabular | synth_ar
    std::string name;                    // label used in records; defaults per kind
    // csv
    std::string path;
    std::vector<std::size_t> target_columns = {0};
    bool header = true;
    // synth_tabular
    std::size_t n = 2000;
    std::size_t d = 8;
    std::string noise = "homoscedastic";
    double noise_std = 0.1;
    // synth_ar
    std::size_t length = 2000;
    double phi_true = 0.8;
    // windowing (synth_ar always windows; csv windows when windowed = true)
    bool windowed = false;
    std::size_t input_length = 24;
    std::size_t horizon = 1;
    std::size_t stride = 1;
    std::size_t target_channel = 0;
    // shared
    bool standardize_flag = true;
    std::string split = "";  // chronological | shuffled; default by kind
    std::uint64_t data_seed = 7;

    Dataset build() const;
};

struct SweepSpec {
    std::vector<std::size_t> ks = {1, 2, 4, 8, 16};
    std::vector<Regime> regimes = {Regime::Homeo, Regime::ProjOff, Regime::ProjOn};
    std::vector<bool> ar_flags = {false};
    std::size_t seeds_per_cell = 3;
};

struct FullConfig {
    DataSpec data;
    TrainConfig train;
    SweepSpec sweep;
};

// Plain-text sectioned key/value config ("[section]" headers, "key = value"
// lines, '#' comments). Unknown keys and malformed lines are errors naming
// the key and line number.
FullConfig parse_config_file(const std::string& path);
FullConfig parse_config_text(const std::string& text, const std::string& origin);

}  // namespace eve
