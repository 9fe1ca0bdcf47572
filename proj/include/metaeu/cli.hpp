#pragma once
// Batch driver for the full protocol. Each subcommand writes its artifact
// into a stage directory under the run dir, together with a manifest
// recording the config hash, the seed and the hashes of everything it
// produced. Stage ordering is enforced: a stage refuses to run when its
// prerequisites are missing (missing_artifact) or were produced under a
// different config hash (staleness_error). Stage directories are never
// overwritten.

#include <string>
#include <vector>

namespace metaeu {

// Returns the process exit code: 0 on success, 1 on a reported error
// ("error:<tag>: message" on stderr), 2 on internal failure.
int run_cli(const std::vector<std::string>& args);

} // namespace metaeu
