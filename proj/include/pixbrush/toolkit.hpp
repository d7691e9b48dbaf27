#pragma once

#include <memory>
#include <string>
#include <vector>

#include "pixbrush/config.hpp"
#include "pixbrush/guidance.hpp"
#include "pixbrush/image.hpp"
#include "pixbrush/mesh.hpp"
#include "pixbrush/trainer.hpp"

namespace pixbrush {

// One localized edit in texture space: where it applies and what it
// paints. provenance carries the digest of the config that produced it.
struct EditLayer {
  Image probability;  // R x R x 1 in [0,1]
  Image rgb;          // R x R x 3 in [0,1]
  std::string provenance;
};

// Left-to-right fold over the layers: out <- p * rgb + (1 - p) * out per
// texel, so later layers paint over earlier ones. All resolutions must
// match the base texture's.
Image composite_layers(const Image& base_texture,
                       const std::vector<EditLayer>& layers);

// Single-layer special case; texels with p = 0 are bit-identical to the
// existing texture.
Image overlay_on_existing(const Image& existing_texture,
                          const EditLayer& layer);

// Fixed-dimension image embedding for the retrieval harness.
class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual std::vector<double> embed(const Image& image) const = 0;
  virtual int dim() const = 0;
};

// Bundled deterministic embedder: a 4x4x4 RGB color histogram (64 bins),
// L2-normalized. No pretrained weights involved.
class HistogramEmbedder : public Embedder {
 public:
  std::vector<double> embed(const Image& image) const override;
  int dim() const override { return 64; }
};

// Retrieval metric: for each result render, rank every reference image by
// cosine similarity and count a success when its own reference ranks
// strictly first (ties count as failure). Returns 100 * successes / N.
// Both lists must have the same length, at least 2.
double r_precision(const std::vector<Image>& result_renders,
                   const std::vector<Image>& reference_images,
                   const Embedder& embedder);

// Mean cosine similarity over aligned (result, reference) pairs.
double mean_similarity(const std::vector<Image>& result_renders,
                       const std::vector<Image>& reference_images,
                       const Embedder& embedder);

// Writes the run's assets into out_dir:
//   texture.png probability.png mask.png mesh.obj mesh.mtl
//   turntable.png manifest.txt run_config.txt
// The turntable shows 8 azimuths (45 degree spacing) at elevation 30,
// radius 1.25, in a 4x2 grid. The state must belong to the given config
// (digests are compared). All writes are atomic; contents carry no
// timestamps so identical runs export identical bytes.
void export_assets(const TrainState& state, const Mesh& mesh,
                   const TrainConfig& config, const std::string& out_dir);

// Reads an exported run directory back as an EditLayer
// (probability.png + texture.png; provenance from manifest.txt when
// present).
EditLayer load_layer(const std::string& dir);

// Builds the configured guidance backend. toy_targets applies to the toy
// backend only.
std::shared_ptr<GuidanceBackend> make_backend(const TrainConfig& config,
                                              ToyTargets toy_targets = {});

}  // namespace pixbrush
