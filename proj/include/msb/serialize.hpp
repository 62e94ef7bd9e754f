#pragma once

#include "msb/stacking.hpp"

#include <iosfwd>
#include <string>

namespace msb {

inline constexpr int kModelFormatVersion = 1;

/// Versioned JSON model files. Doubles round-trip exactly; missing values are
/// stored as null. Bootstrap in-bag counts of forests are not stored.
void save_learner(std::ostream& out, const FittedLearner& learner);
FittedLearner load_learner(std::istream& in);

void save_msb(std::ostream& out, const FittedMSB& model);
FittedMSB load_msb(std::istream& in);

void save_msb_file(const std::string& path, const FittedMSB& model);
FittedMSB load_msb_file(const std::string& path);

}  // namespace msb
