#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "delight/config.hpp"
#include "delight/error.hpp"
#include "delight/crf.hpp"
#include "delight/decompose.hpp"
#include "delight/gbuffer.hpp"
#include "delight/light_estimate.hpp"
#include "delight/penumbra.hpp"
#include "delight/scene.hpp"
#include "delight/solar.hpp"

namespace delight {

/// A stage failed; `hint` suggests a remedy.
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& message, std::string hint = {})
      : Error(stage + ": " + message + (hint.empty() ? "" : " (" + hint + ")")),
        stage_(std::move(stage)),
        hint_(std::move(hint)) {}
  const std::string& stage() const { return stage_; }
  const std::string& hint() const { return hint_; }

 private:
  std::string stage_;
  std::string hint_;
};

enum ExitCode { kExitOk = 0, kExitConfig = 2, kExitStage = 3, kExitRatioRejected = 4 };

/// Sun direction for the collection; throws StageError when below the horizon.
SunDirection compute_sun(const CaptureMeta& meta);

std::vector<GBuffer> compute_gbuffers(const Project& project, const LightingFrame& light,
                                      int workers);

std::vector<VisibilityMask> refine_masks(const Project& project, const std::vector<GBuffer>& gbufs,
                                         const CrfParams& params, int workers);

/// Pairs from every image, filtered and pooled; per-image counts are
/// recorded in the result.
IlluminationRatio estimate_collection_ratio(const Project& project,
                                            const std::vector<GBuffer>& gbufs,
                                            const std::vector<VisibilityMask>& masks,
                                            const PairParams& pairs, const RatioParams& ratio,
                                            int workers,
                                            std::vector<LitShadowPair>* pooled = nullptr);

struct SoftenResult {
  SoftVisibility soft;
  std::vector<ShadowProfile> profiles;
  std::vector<std::vector<double>> solved;
};

SoftenResult soften_mask(const VisibilityMask& mask, const GBuffer& gbuf, const LinearImage& img,
                         const IlluminationRatio& ratio, const PenumbraParams& params);

std::vector<Raster> soften_masks(const Project& project, const std::vector<GBuffer>& gbufs,
                                 const std::vector<VisibilityMask>& masks,
                                 const IlluminationRatio& ratio, const PenumbraParams& params,
                                 int workers);

std::vector<AlbedoResult> decompose_all(const Project& project, const std::vector<GBuffer>& gbufs,
                                        const std::vector<Raster>& alphas,
                                        const IlluminationRatio& ratio,
                                        const DecomposeParams& params, int workers);

/// 1 on valid pixels farther than `radius` pixels (Chebyshev) from any
/// transition of the binarized `alpha` or any fractional alpha value.
Raster boundary_exclusion_mask(const Raster& alpha, const Raster& face_id, int radius);

/// Compares pred_dir/<stem>/{albedo.pfm,shading.pfm,flags.png} with
/// truth_dir/<stem>/{albedo,shading,alpha,faceid}.pfm for every truth stem.
nlohmann::json evaluate_outputs(const std::filesystem::path& pred_dir,
                                const std::filesystem::path& truth_dir);

struct RunResult {
  int exit_code = kExitOk;
  nlohmann::json manifest;
  std::vector<std::string> cache_hits;
};

/// Runs the selected stages in order, reusing intermediates whose stage key
/// (hash of inputs, upstream key and config section) is unchanged. Writes
/// manifest.json (deterministic) and run_log.json (timings, cache hits).
/// Throws StageError on stage failure.
RunResult run_pipeline(const PipelineConfig& cfg);

/// Configuration embedded in a manifest, with `output_dir` and `workers` supplied.
PipelineConfig config_from_manifest(const std::filesystem::path& manifest,
                                    const std::filesystem::path& output_dir, int workers);

}  // namespace delight
