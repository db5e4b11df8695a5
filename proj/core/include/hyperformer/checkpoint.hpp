#pragma once

#include <filesystem>
#include <iosfwd>

#include "hyperformer/model.hpp"

namespace hyperformer {

/// Writes `HYPERFORMER v1 N d L m headKind scaleScores useFFN`, then one
/// section per parameter: a `name rows cols` line followed by rows*cols
/// little-endian IEEE-754 doubles. Sections follow ModelState::parameters().
void save_checkpoint(std::ostream& out, const ModelState& state);
void save_checkpoint(const std::filesystem::path& path, const ModelState& state);

/// Inverse of save_checkpoint; bitwise exact. Head widths are recovered from
/// section shapes. `message_passing` is not part of the format and is taken
/// from the caller.
ModelState load_checkpoint(std::istream& in, bool message_passing = true);
ModelState load_checkpoint(const std::filesystem::path& path, bool message_passing = true);

}  // namespace hyperformer
