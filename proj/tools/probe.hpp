#pragma once

#include <ostream>

/// Runs the per-module invariant checks, printing one line per check. True when all pass.
bool run_probe(std::ostream& out);
