#pragma once

// Porter's 1980 suffix-stripping algorithm, without the later revisions.

#include <string>

namespace puminer {

// One pass of the reference algorithm over a lowercase word.
// Non-alphabetic characters are treated as consonants.
std::string porter_stem(const std::string& word);

// porter_stem iterated until stable. The reference algorithm is not
// idempotent (e.g. "synchronis" -> "synchroni"); token normalization uses
// the fixed point so normalizing already-normalized text is a no-op.
std::string porter_stem_fixpoint(const std::string& word);

}  // namespace puminer
