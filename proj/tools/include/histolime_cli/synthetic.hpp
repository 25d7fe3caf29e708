#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "histolime/dataset.hpp"
#include "histolime/metrics.hpp"
#include "histolime/raster.hpp"

namespace histolime::synth {

/// Bluish field with one red disk; `seed` picks the disk center, radius and
/// pixel noise. The disk is the only red-dominant region.
Raster two_region_image(std::uint64_t seed, int side = 64);

/// Tissue-like tile whose red area depends on the class: OSCC tiles carry a
/// larger red blob on average, with some overlap between classes.
Raster tissue_tile(Label label, std::uint64_t seed, int side = 64);

/// Writes <root>/Normal/normal_NNN.png and <root>/OSCC/oscc_NNN.png.
void write_corpus(const std::filesystem::path& root, int normal, int oscc, std::uint64_t seed,
                  int side = 64);

/// Epoch log whose validation loss bottoms out at `best_epoch`.
std::string epoch_log(int epochs, int best_epoch, std::uint64_t seed);

/// Prediction rows (id,label,p_normal,p_oscc) realising the given counts at
/// threshold 0.5.
std::string predictions_for(const ConfusionMatrix& m, std::uint64_t seed);

}  // namespace histolime::synth
