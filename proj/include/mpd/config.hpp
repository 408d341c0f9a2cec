#pragma once

#include <optional>
#include <string>

#include "mpd/simulation.hpp"

namespace mpd {

struct SuperpopSource {
    enum class Kind { synthetic, csv };
    Kind kind = Kind::synthetic;
    int n = 0;
    std::uint64_t seed = 0;
    OutcomeForm form = OutcomeForm::literal;
    std::string path;
    SuperpopSchema schema;
};

struct RunConfig {
    SimConfig sim;
    SuperpopSource source;
    // Stratification by a CSV assignment column; resolved into breakpoints
    // once the superpopulation is loaded.
    std::optional<std::string> strata_assignment_col;
    std::string canonical;  // resolved config as canonical JSON text
};

// Parses and validates a JSON run configuration. Unknown keys are rejected
// with their full key path; defaults (wave mix, b_targ, omega mode) are
// filled in.
RunConfig parse_config(const std::string& path);
RunConfig parse_config_text(const std::string& text);

Superpopulation load_source(const SuperpopSource& source);

// Fills strata breakpoints from an assignment column, when configured.
void resolve_strata(RunConfig& config, const Superpopulation& superpop);

std::string config_hash(const std::string& canonical);

}  // namespace mpd
