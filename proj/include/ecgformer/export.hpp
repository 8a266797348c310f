#pragma once

// Attention-map export: one CSV per (stage, layer, head, lead) raw attention
// matrix, the gated head's lead-attribution matrix, and one SVG per lead
// overlaying the CLS-row attention of the final stage on the signal trace.

#include <string>
#include <vector>

#include "ecgformer/signal.hpp"

namespace ecgformer {

// Runs the checkpointed model over the first segment window of `recording`
// (deterministic crop at sample 0) and writes into `out_dir`:
//   stage{s}_layer{l}_head{h}_lead{c}.csv   attention matrix, %.17g
//   lead_attribution.csv                    [classes x leads]
//   lead{c}.svg                             signal + CLS-row attention heat
// Returns the file names written, in a stable order. Byte-identical on
// re-export. `class_names` labels the attribution rows; defaults to
// class_{i}.
std::vector<std::string> export_attention(
    const std::string& checkpoint_path, const Recording& recording,
    const std::string& out_dir,
    const std::vector<std::string>& class_names = {});

}  // namespace ecgformer
