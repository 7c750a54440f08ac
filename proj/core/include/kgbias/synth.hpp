#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "kgbias/embedding.hpp"
#include "kgbias/kg.hpp"

namespace kgbias {

enum class SynthEmbeddingMode { GroupSeparated, Random };

// Generative model with a planted correlation between one binary sensitive
// relation and one binary target relation:
//   P(target = p1 | sensitive = s1) = P(target = p0 | sensitive = s0) = rho.
struct SynthConfig {
    std::size_t n_entities = 5000;
    std::string sensitive_relation = "sensitive";
    std::string target_relation = "target";
    std::vector<std::string> sensitive_tails = {"s0", "s1"};  // exactly two
    std::vector<double> sensitive_marginals = {0.5, 0.5};     // sums to 1
    std::vector<std::string> target_tails = {"p0", "p1"};     // exactly two
    double rho = 0.95;  // in [0.5, 1]
    SynthEmbeddingMode embedding_mode = SynthEmbeddingMode::GroupSeparated;
    int dim = 400;  // see group_separation note below
    std::uint64_t seed = 0;

    void validate() const;
};

// Each entity receives one sensitive triple and one target triple. In
// GROUP_SEPARATED mode the embeddings are group means +- unit-variance
// Gaussian noise, with the means +-6/sqrt(dim) per coordinate so the groups
// are linearly separable; RANDOM mode emits pure noise.
std::pair<KnowledgeGraph, std::optional<EmbeddingSet>> generate(const SynthConfig& cfg);

// Expected DPD total of the Bayes-optimal classifier yhat = argmax
// P(target | sensitive) on the generative model: 2 whenever rho > 0.5 (the
// Bayes rule is deterministic and differs per group), 0 at rho = 0.5.
double analytic_dpd(const SynthConfig& cfg);

}  // namespace kgbias
