#include "delight/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>

#include "delight/evaluate.hpp"
#include "delight/hash.hpp"
#include "delight/parallel.hpp"

namespace delight {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

int resolve_workers(int workers) { return workers > 0 ? workers : default_workers(); }

json vec_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

json finite_or_sentinel(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  return v;
}

void write_json(const json& doc, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << doc.dump(2) << '\n';
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json sun_json(const SunDirection& sun) {
  return {{"azimuth_deg", sun.azimuth_deg},
          {"elevation_deg", sun.elevation_deg},
          {"vector", vec_json(sun.vector)}};
}

// Hashes of every project input file, in manifest order.
json input_hashes(const Project& project) {
  json doc = json::object();
  doc["meta.json"] = sha256_file(project.dir / "meta.json");
  doc["cameras.json"] = sha256_file(project.dir / "cameras.json");
  const fs::path mesh = fs::exists(project.dir / "mesh.obj") ? project.dir / "mesh.obj"
                                                              : project.dir / "mesh.ply";
  doc[mesh.filename().string()] = sha256_file(mesh);
  for (const auto& img : project.images) doc[img.file] = sha256_file(project.dir / img.file);
  return doc;
}

class StageRunner {
 public:
  StageRunner(const PipelineConfig& cfg, json& log, std::vector<std::string>& hits)
      : cfg_(cfg), log_(log), hits_(hits) {}

  std::string key(const std::string& stage, const json& parts) const {
    return sha256_hex(json{{"stage", stage}, {"parts", parts}}.dump());
  }

  bool cached(const std::string& stage, const std::string& key,
              const std::vector<fs::path>& outputs) const {
    const fs::path key_file = cfg_.output_dir / "cache" / (stage + ".key");
    if (!fs::exists(key_file) || read_text(key_file) != key) return false;
    for (const auto& p : outputs) {
      if (!fs::exists(p)) return false;
    }
    return true;
  }

  void commit(const std::string& stage, const std::string& key) const {
    fs::create_directories(cfg_.output_dir / "cache");
    std::ofstream(cfg_.output_dir / "cache" / (stage + ".key")) << key;
  }

  template <typename Fn>
  void run(const std::string& stage, const std::string& hint, Fn&& fn) {
    const auto start = std::chrono::steady_clock::now();
    bool hit = false;
    try {
      hit = fn();
    } catch (const StageError&) {
      throw;
    } catch (const std::exception& e) {
      throw StageError(stage, e.what(), hint);
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    log_["stages"].push_back({{"stage", stage}, {"seconds", seconds}, {"cache_hit", hit}});
    if (hit) hits_.push_back(stage);
  }

 private:
  const PipelineConfig& cfg_;
  json& log_;
  std::vector<std::string>& hits_;
};

}  // namespace

SunDirection compute_sun(const CaptureMeta& meta) {
  const SunDirection sun = sun_direction(meta);
  if (sun_below_horizon(sun)) {
    throw StageError("sunpos",
                     "sun below horizon (elevation " + std::to_string(sun.elevation_deg) + " deg)",
                     "check timestamp_utc is UTC and latitude/longitude signs");
  }
  return sun;
}

std::vector<GBuffer> compute_gbuffers(const Project& project, const LightingFrame& light,
                                      int workers) {
  const Bvh bvh(project.mesh);
  std::vector<GBuffer> out(project.images.size());
  parallel_for(out.size(), resolve_workers(workers), [&](std::size_t i) {
    const auto& img = project.images[i];
    out[i] = rasterize_gbuffer(bvh, img.camera, light, img.image.width(), img.image.height(), 1);
  });
  return out;
}

std::vector<VisibilityMask> refine_masks(const Project& project, const std::vector<GBuffer>& gbufs,
                                         const CrfParams& params, int workers) {
  std::vector<VisibilityMask> out(project.images.size());
  parallel_for(out.size(), resolve_workers(workers), [&](std::size_t i) {
    out[i] = refine_visibility(projected_mask(gbufs[i], params.unary_confidence),
                               project.images[i].image, gbufs[i], params);
  });
  return out;
}

IlluminationRatio estimate_collection_ratio(const Project& project,
                                            const std::vector<GBuffer>& gbufs,
                                            const std::vector<VisibilityMask>& masks,
                                            const PairParams& pairs, const RatioParams& ratio,
                                            int workers, std::vector<LitShadowPair>* pooled) {
  pairs.validate();
  std::vector<std::vector<LitShadowPair>> per_image(project.images.size());
  parallel_for(per_image.size(), resolve_workers(workers), [&](std::size_t i) {
    const auto& img = project.images[i].image;
    per_image[i] = filter_pairs(
        extract_boundary_pairs(masks[i], gbufs[i], img, pairs, static_cast<int>(i)), img, pairs);
  });
  std::vector<LitShadowPair> all;
  for (const auto& v : per_image) all.insert(all.end(), v.begin(), v.end());
  IlluminationRatio r = estimate_ratio(all, ratio);
  for (std::size_t i = 0; i < per_image.size(); ++i) {
    r.per_image_pairs.emplace_back(project.images[i].stem, per_image[i].size());
  }
  if (pooled) *pooled = std::move(all);
  return r;
}

SoftenResult soften_mask(const VisibilityMask& mask, const GBuffer& gbuf, const LinearImage& img,
                         const IlluminationRatio& ratio, const PenumbraParams& params) {
  SoftenResult r;
  r.profiles = extract_profiles(mask, gbuf, img, ratio, params);
  r.solved.reserve(r.profiles.size());
  for (const auto& p : r.profiles) {
    r.solved.push_back(solve_profile(p, profile_weights(p, params), params.lambda));
  }
  r.soft = composite_soft_mask(mask, r.profiles, r.solved);
  return r;
}

std::vector<Raster> soften_masks(const Project& project, const std::vector<GBuffer>& gbufs,
                                 const std::vector<VisibilityMask>& masks,
                                 const IlluminationRatio& ratio, const PenumbraParams& params,
                                 int workers) {
  std::vector<Raster> out(project.images.size());
  parallel_for(out.size(), resolve_workers(workers), [&](std::size_t i) {
    out[i] = soften_mask(masks[i], gbufs[i], project.images[i].image, ratio, params).soft.alpha;
  });
  return out;
}

std::vector<AlbedoResult> decompose_all(const Project& project, const std::vector<GBuffer>& gbufs,
                                        const std::vector<Raster>& alphas,
                                        const IlluminationRatio& ratio,
                                        const DecomposeParams& params, int workers) {
  if (!ratio.accepted) throw InvalidArgument("illumination ratio was not accepted");
  std::vector<AlbedoResult> out(project.images.size());
  parallel_for(out.size(), resolve_workers(workers), [&](std::size_t i) {
    const LinearImage shading = assemble_shading(gbufs[i], alphas[i], ratio.ratio);
    out[i] = decompose_albedo(project.images[i].image, shading, geometry_flags(gbufs[i]), params);
  });
  return out;
}

Raster boundary_exclusion_mask(const Raster& alpha, const Raster& face_id, int radius) {
  const int w = alpha.width(), h = alpha.height();
  Raster edge(w, h, 1);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const float a = alpha.at(x, y);
      bool e = a > 0.0f && a < 1.0f;
      const bool lit = a >= 0.5f;
      if (x + 1 < w && (alpha.at(x + 1, y) >= 0.5f) != lit) e = true;
      if (y + 1 < h && (alpha.at(x, y + 1) >= 0.5f) != lit) e = true;
      if (x > 0 && (alpha.at(x - 1, y) >= 0.5f) != lit) e = true;
      if (y > 0 && (alpha.at(x, y - 1) >= 0.5f) != lit) e = true;
      edge.at(x, y) = e ? 1.0f : 0.0f;
    }
  }
  // Separable max filter (square dilation).
  Raster tmp(w, h, 1), dil(w, h, 1);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      float m = 0.0f;
      for (int d = std::max(0, x - radius); d <= std::min(w - 1, x + radius) && m == 0.0f; ++d) {
        m = std::max(m, edge.at(d, y));
      }
      tmp.at(x, y) = m;
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      float m = 0.0f;
      for (int d = std::max(0, y - radius); d <= std::min(h - 1, y + radius) && m == 0.0f; ++d) {
        m = std::max(m, tmp.at(x, d));
      }
      dil.at(x, y) = m;
    }
  }
  Raster keep(w, h, 1);
  for (std::size_t i = 0; i < keep.pixel_count(); ++i) {
    keep[i] = (dil[i] == 0.0f && face_id[i] >= 0.0f) ? 1.0f : 0.0f;
  }
  return keep;
}

json evaluate_outputs(const fs::path& pred_dir, const fs::path& truth_dir) {
  std::vector<std::string> stems;
  for (const auto& entry : fs::directory_iterator(truth_dir)) {
    if (entry.is_directory()) stems.push_back(entry.path().filename().string());
  }
  std::sort(stems.begin(), stems.end());
  if (stems.empty()) throw IoError(truth_dir.string() + ": no ground-truth views");

  const auto metrics_json = [](const Metrics& m) {
    return json{{"pixels", m.pixels},
                {"psnr_db", finite_or_sentinel(m.psnr)},
                {"rmse", m.rmse},
                {"relative_rmse", m.relative_rmse},
                {"scale_invariant_rmse", m.scale_invariant_rmse},
                {"scale", vec_json(m.scale)}};
  };
  json report{{"images", json::object()}};
  std::vector<LinearImage> albedos;
  std::vector<Raster> ids, masks;
  for (const auto& stem : stems) {
    const AlbedoResult pred = read_albedo_result(pred_dir / stem);
    const fs::path t = truth_dir / stem;
    const LinearImage albedo = LinearImage::from_raster(read_pfm(t / "albedo.pfm"));
    const LinearImage shading = LinearImage::from_raster(read_pfm(t / "shading.pfm"));
    const Raster alpha = read_pfm(t / "alpha.pfm");
    const Raster face = read_pfm(t / "faceid.pfm");
    Raster ok(albedo.width(), albedo.height(), 1);
    for (int y = 0; y < ok.height(); ++y) {
      for (int x = 0; x < ok.width(); ++x) {
        ok.at(x, y) = pred.flag(x, y) == PixelFlag::ok && face.at(x, y) >= 0.0f ? 1.0f : 0.0f;
      }
    }
    Raster interior = boundary_exclusion_mask(alpha, face, 14);
    for (std::size_t i = 0; i < interior.pixel_count(); ++i) interior[i] *= ok[i];
    json entry{{"albedo", metrics_json(evaluate(pred.albedo, albedo, ok))},
               {"shading", metrics_json(evaluate(pred.shading, shading, ok))}};
    std::size_t n_interior = 0;
    for (float v : interior.data()) n_interior += v > 0.0f;
    if (n_interior > 0) {
      entry["albedo_interior"] = metrics_json(evaluate(pred.albedo, albedo, interior));
    }
    report["images"][stem] = entry;
    albedos.push_back(pred.albedo);
    ids.push_back(face);
    masks.push_back(ok);
  }
  report["cross_image_consistency"] = cross_image_consistency(albedos, ids, masks);
  return report;
}

PipelineConfig config_from_manifest(const fs::path& manifest, const fs::path& output_dir,
                                    int workers) {
  std::ifstream in(manifest);
  if (!in) throw ConfigError("cannot open manifest " + manifest.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(manifest.string() + ": " + e.what());
  }
  if (!doc.contains("config")) throw ConfigError(manifest.string() + ": no embedded config");
  json cfg = doc["config"];
  cfg["project"]["output"] = fs::absolute(output_dir).lexically_normal().string();
  cfg["project"]["workers"] = workers;
  return config_from_json(cfg);
}

RunResult run_pipeline(const PipelineConfig& cfg_in) {
  cfg_in.validate();
  PipelineConfig cfg = cfg_in;
  cfg.output_dir = fs::absolute(cfg.output_dir).lexically_normal();
  const int workers = resolve_workers(cfg.workers);
  RunResult result;
  json log{{"workers", workers}, {"stages", json::array()}};
  StageRunner runner(cfg, log, result.cache_hits);
  const fs::path out = cfg.output_dir;
  fs::create_directories(out);

  Project project;
  try {
    project = load_project(cfg.project_dir);
  } catch (const std::exception& e) {
    throw StageError("load", e.what(), "check project.dir and its cameras.json/meta.json/mesh");
  }
  json cfg_doc = config_to_json(cfg);
  cfg_doc["project"].erase("output");
  cfg_doc["project"].erase("workers");
  json manifest{{"config", cfg_doc},
                {"config_hash", sha256_hex(cfg_doc.dump())},
                {"inputs", input_hashes(project)},
                {"stages", json::object()},
                {"warnings", json::array()}};
  const auto finish = [&](int code) {
    manifest["exit_code"] = code;
    write_json(manifest, out / "manifest.json");
    write_json(log, out / "run_log.json");
    result.exit_code = code;
    result.manifest = manifest;
    return result;
  };
  const auto stem_paths = [&](const fs::path& dir, const std::string& suffix) {
    std::vector<fs::path> paths;
    for (const auto& img : project.images) paths.push_back(dir / (img.stem + suffix));
    return paths;
  };

  // sunpos
  SunDirection sun;
  std::string key = runner.key("sunpos", {manifest["inputs"]["meta.json"]});
  runner.run("sunpos", "check meta.json", [&] {
    const bool hit = runner.cached("sunpos", key, {out / "sun.json"});
    sun = compute_sun(project.meta);
    if (!hit) {
      write_json(sun_json(sun), out / "sun.json");
      runner.commit("sunpos", key);
    }
    return hit;
  });
  manifest["stages"]["sunpos"] = key;
  manifest["sun"] = sun_json(sun);
  const LightingFrame light = lighting_frame(project.meta, sun);
  if (!cfg.runs("gbuffer")) return finish(kExitOk);

  // gbuffer
  std::vector<GBuffer> gbufs;
  key = runner.key("gbuffer", {key, manifest["inputs"]});
  runner.run("gbuffer", "check mesh and camera poses", [&] {
    std::vector<fs::path> outputs;
    for (const auto& img : project.images) outputs.push_back(out / "gbuffer" / img.stem / "faceid.pfm");
    if (runner.cached("gbuffer", key, outputs)) {
      for (const auto& img : project.images) gbufs.push_back(read_gbuffer(out / "gbuffer" / img.stem));
      return true;
    }
    gbufs = compute_gbuffers(project, light, workers);
    for (std::size_t i = 0; i < gbufs.size(); ++i) {
      write_gbuffer(gbufs[i], out / "gbuffer" / project.images[i].stem);
    }
    runner.commit("gbuffer", key);
    return false;
  });
  manifest["stages"]["gbuffer"] = key;
  if (!cfg.runs("refine")) return finish(kExitOk);

  // refine
  std::vector<VisibilityMask> masks;
  key = runner.key("refine", {key, config_section(cfg, "crf")});
  runner.run("refine", "adjust [crf] parameters", [&] {
    const auto outputs = stem_paths(out / "masks", ".pfm");
    if (runner.cached("refine", key, outputs)) {
      for (const auto& p : outputs) masks.push_back(read_mask(p));
      return true;
    }
    masks = refine_masks(project, gbufs, cfg.crf, workers);
    for (std::size_t i = 0; i < masks.size(); ++i) write_mask(masks[i], outputs[i]);
    runner.commit("refine", key);
    return false;
  });
  manifest["stages"]["refine"] = key;
  if (!cfg.runs("estimate")) return finish(kExitOk);

  // estimate
  IlluminationRatio ratio;
  key = runner.key("estimate", {key, config_section(cfg, "pairs"), config_section(cfg, "ratio")});
  runner.run("estimate", "the scene needs cast shadows on surfaces of uniform albedo", [&] {
    if (runner.cached("estimate", key, {out / "light.json"})) {
      ratio = read_light_json(out / "light.json");
      return true;
    }
    ratio = estimate_collection_ratio(project, gbufs, masks, cfg.pairs, cfg.ratio, workers);
    write_light_json(ratio, out / "light.json");
    runner.commit("estimate", key);
    return false;
  });
  manifest["stages"]["estimate"] = key;
  manifest["accepted"] = ratio.accepted;
  manifest["ratio"] = vec_json(ratio.ratio);
  manifest["pairs"] = {{"total", ratio.n_pairs_total}, {"inliers", ratio.n_inliers}};
  for (const auto& [stem, n] : ratio.per_image_pairs) {
    if (n == 0) manifest["warnings"].push_back("image " + stem + ": no usable lit/shadow pairs");
  }
  if (!ratio.accepted) {
    manifest["warnings"].push_back("illumination ratio rejected: " + ratio.reason);
    return finish(kExitRatioRejected);
  }
  if (!cfg.runs("soften")) return finish(kExitOk);

  // soften
  std::vector<Raster> soft;
  key = runner.key("soften", {key, config_section(cfg, "penumbra")});
  runner.run("soften", "adjust [penumbra] parameters", [&] {
    const auto outputs = stem_paths(out / "soft", ".pfm");
    if (runner.cached("soften", key, outputs)) {
      for (const auto& p : outputs) soft.push_back(read_pfm(p));
      return true;
    }
    soft = soften_masks(project, gbufs, masks, ratio, cfg.penumbra, workers);
    for (std::size_t i = 0; i < soft.size(); ++i) write_pfm(soft[i], outputs[i]);
    runner.commit("soften", key);
    return false;
  });
  manifest["stages"]["soften"] = key;
  if (!cfg.runs("decompose")) return finish(kExitOk);

  // decompose
  key = runner.key("decompose", {key, config_section(cfg, "decompose")});
  runner.run("decompose", "adjust [decompose] parameters", [&] {
    std::vector<fs::path> outputs;
    for (const auto& img : project.images) outputs.push_back(out / "decompose" / img.stem / "flags.png");
    if (runner.cached("decompose", key, outputs)) return true;
    const auto results = decompose_all(project, gbufs, soft, ratio, cfg.decompose, workers);
    for (std::size_t i = 0; i < results.size(); ++i) {
      write_albedo_result(results[i], out / "decompose" / project.images[i].stem);
    }
    runner.commit("decompose", key);
    return false;
  });
  manifest["stages"]["decompose"] = key;
  if (!cfg.runs("eval")) return finish(kExitOk);

  // eval
  const fs::path truth = project.dir / "truth";
  if (!fs::is_directory(truth)) {
    manifest["warnings"].push_back("eval skipped: project has no truth/ directory");
    return finish(kExitOk);
  }
  json truth_hashes = json::object();
  for (const auto& entry : fs::recursive_directory_iterator(truth)) {
    if (entry.is_regular_file()) {
      truth_hashes[fs::relative(entry.path(), truth).generic_string()] = sha256_file(entry.path());
    }
  }
  key = runner.key("eval", {key, truth_hashes});
  runner.run("eval", "check the truth/ layout", [&] {
    if (runner.cached("eval", key, {out / "eval" / "report.json"})) return true;
    write_json(evaluate_outputs(out / "decompose", truth), out / "eval" / "report.json");
    runner.commit("eval", key);
    return false;
  });
  manifest["stages"]["eval"] = key;
  return finish(kExitOk);
}

}  // namespace delight
