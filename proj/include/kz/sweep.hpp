#pragma once

#include <iosfwd>
#include <string>

#include "kz/config.hpp"

namespace kz {

struct SweepOutcome {
    int n_points = 0;
    int n_failed = 0;
    std::string results_path;
    std::string manifest_path;
};

// Executes every planned point and writes one NDJSON record per point to
// cfg.out, always in sweep order, plus a run manifest at cfg.out +
// ".manifest.json".  Points run on up to cfg.workers threads; records are
// flushed by a single writer as their prefix completes, so the result bytes
// are identical for any worker count.  A point that throws is written as an
// error record ("error", "error_kind") and the sweep continues; only a
// failure to write the files themselves aborts the run.  `log`, when given,
// receives one line per finished point.
SweepOutcome run_sweep(const ExperimentConfig& cfg, std::ostream* log = nullptr);

} // namespace kz
