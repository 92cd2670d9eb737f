#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "oracle.hpp"
#include "trajkit/fusion.hpp"
#include "trajkit/linalg.hpp"
#include "trajkit/synth.hpp"
#include "trajkit/types.hpp"

namespace testing_support {

oracle::M to_oracle(const trajkit::Matrix& m);
trajkit::Matrix from_oracle(const oracle::M& m);
oracle::Attn to_oracle(const trajkit::AttentionParams& p);
oracle::Mlp to_oracle(const trajkit::MlpParams& p);
oracle::Ln to_oracle(const trajkit::LayerNormParams& p);

/// Random parameters on the self-fusion path with every tensor nonzero.
trajkit::SelfFusionParams random_self_params(std::mt19937_64& g, std::size_t d, std::size_t hidden,
                                             double scale = 0.5);
trajkit::AttentionParams random_attention(std::mt19937_64& g, std::size_t d, double scale = 0.5);
trajkit::Matrix random_clip(std::mt19937_64& g, std::size_t n, std::size_t d, double scale = 1.0);

/// Fresh, empty directory under the system temp dir.
std::filesystem::path temp_dir(const std::string& tag);

std::string read_file(const std::filesystem::path& p);

/// Copy of the entries, safe to iterate when the matrix is a temporary.
inline std::vector<double> values(const trajkit::Matrix& m) { return m.data(); }

/// Noiseless synthetic configuration with perfect labels.
trajkit::SynthConfig clean_scene(std::size_t identities, std::size_t frames, std::size_t d, std::uint64_t seed);

}  // namespace testing_support
