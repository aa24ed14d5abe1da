#pragma once

namespace kz::accept {

struct Options {
    bool long_mode = false; // rerun the thermodynamic sweep at 1e5 shots with
                            // kappa2/kappa3 fits (reported, not gated)
    int only = 0;           // run a single criterion by number; 0 = all
};

// End-to-end acceptance checks, one printed line each:
//   [ k] PASS  <name>: <measured values and gates>   <elapsed>
// Gates and tolerances are pinned in the implementation.  Returns the number
// of failed criteria.
int run_acceptance(const Options& opt);

} // namespace kz::accept
