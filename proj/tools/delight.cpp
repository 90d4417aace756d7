// delight: albedo/shading decomposition of geotagged image collections.
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "delight/config.hpp"
#include "delight/evaluate.hpp"
#include "delight/parallel.hpp"
#include "delight/pipeline.hpp"
#include "delight/synth.hpp"

namespace fs = std::filesystem;
using namespace delight;
using nlohmann::json;

namespace {

struct Paths {
  fs::path project, gbuffer, masks, light, out, pred, truth, report, config, manifest;
};

std::vector<GBuffer> load_gbuffers(const Project& p, const fs::path& dir) {
  std::vector<GBuffer> g;
  for (const auto& img : p.images) g.push_back(read_gbuffer(dir / img.stem));
  return g;
}

std::vector<VisibilityMask> load_masks(const Project& p, const fs::path& dir) {
  std::vector<VisibilityMask> m;
  for (const auto& img : p.images) m.push_back(read_mask(dir / (img.stem + ".pfm")));
  return m;
}

void print_json(const json& doc) { std::cout << doc.dump(2) << '\n'; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Recover albedo and shading from aerial image collections with known geometry"};
  app.require_subcommand(1);
  Paths p;
  int workers = 1;
  app.add_option("-j,--workers", workers, "Worker threads (0 = all cores)")->check(CLI::Range(0, 1024));

  auto* run = app.add_subcommand("run", "Run the full pipeline");
  auto* cfg_opt = run->add_option("--config", p.config, "TOML configuration")->check(CLI::ExistingFile);
  auto* man_opt = run->add_option("--manifest", p.manifest, "Replay the config embedded in a manifest")
                      ->check(CLI::ExistingFile);
  run->add_option("--out", p.out, "Output directory for --manifest (default: next to it)");
  cfg_opt->excludes(man_opt);

  double lat = 0, lon = 0;
  std::string time;
  auto* sunpos = app.add_subcommand("sunpos", "Print the sun direction as JSON");
  sunpos->add_option("--lat", lat, "Latitude in degrees")->required()->check(CLI::Range(-90.0, 90.0));
  sunpos->add_option("--lon", lon, "Longitude in degrees, east positive")
      ->required()
      ->check(CLI::Range(-180.0, 180.0));
  sunpos->add_option("--time", time, "UTC time YYYY-MM-DDThh:mm:ssZ")->required();

  std::string scene = "box-town";
  std::uint64_t seed = 1;
  auto* synth = app.add_subcommand("synth", "Render one synthetic project");
  synth->add_option("--scene", scene, "Scene name")
      ->check(CLI::IsMember(canonical_project_names()));
  synth->add_option("--seed", seed, "Random seed");
  synth->add_option("--out", p.out, "Output directory")->required();

  auto* suite = app.add_subcommand("suite", "Render every synthetic test project");
  suite->add_option("--seed", seed, "Random seed");
  suite->add_option("--out", p.out, "Output directory")->required();

  auto* gbuffer = app.add_subcommand("gbuffer", "Rasterize per-image G-buffers");
  gbuffer->add_option("--project", p.project)->required()->check(CLI::ExistingDirectory);
  gbuffer->add_option("--out", p.out)->required();

  CrfParams crf;
  auto* refine = app.add_subcommand("refine", "Refine projected sun-visibility masks");
  refine->add_option("--project", p.project)->required()->check(CLI::ExistingDirectory);
  refine->add_option("--gbuffer", p.gbuffer)->required()->check(CLI::ExistingDirectory);
  refine->add_option("--out", p.out)->required();
  refine->add_option("--crf-sigma-xy", crf.sigma_xy, "Appearance kernel width (px)");
  refine->add_option("--crf-sigma-rgb", crf.sigma_rgb, "Appearance kernel color width");
  refine->add_option("--crf-sigma-s", crf.sigma_s, "Smoothness kernel width (px)");
  refine->add_option("--crf-w-appearance", crf.w_appearance, "Appearance kernel weight");
  refine->add_option("--crf-w-smooth", crf.w_smooth, "Smoothness kernel weight");
  refine->add_option("--crf-iterations", crf.iterations, "Mean-field iterations");
  refine->add_option("--crf-confidence", crf.unary_confidence, "Confidence in the projected label");

  PairParams pairs;
  RatioParams ratio_params;
  auto* estimate = app.add_subcommand("estimate-light", "Estimate L_sun/L_sky for the collection");
  estimate->add_option("--project", p.project)->required()->check(CLI::ExistingDirectory);
  estimate->add_option("--masks", p.masks)->required()->check(CLI::ExistingDirectory);
  estimate->add_option("--gbuffer", p.gbuffer)->required()->check(CLI::ExistingDirectory);
  estimate->add_option("--out", p.light, "light.json to write")->required();
  estimate->add_option("--offset", pairs.offset, "Pixels stepped into each side of a boundary");
  estimate->add_option("--depth-tau", pairs.depth_tau, "Maximum depth difference (m)");

  PenumbraParams penumbra;
  auto* soften = app.add_subcommand("soften", "Solve soft sun visibility along shadow boundaries");
  soften->add_option("--project", p.project)->required()->check(CLI::ExistingDirectory);
  soften->add_option("--masks", p.masks)->required()->check(CLI::ExistingDirectory);
  soften->add_option("--gbuffer", p.gbuffer)->required()->check(CLI::ExistingDirectory);
  soften->add_option("--light", p.light)->required()->check(CLI::ExistingFile);
  soften->add_option("--out", p.out)->required();
  soften->add_option("--lambda", penumbra.lambda, "Regularizer weight");
  soften->add_option("--half-length", penumbra.half_length, "Profile half length (samples)");

  DecomposeParams decomp;
  auto* decompose = app.add_subcommand("decompose", "Write albedo, shading and flags per image");
  decompose->add_option("--project", p.project)->required()->check(CLI::ExistingDirectory);
  decompose->add_option("--gbuffer", p.gbuffer)->required()->check(CLI::ExistingDirectory);
  decompose->add_option("--masks", p.masks, "Soft or binary visibility masks")
      ->required()
      ->check(CLI::ExistingDirectory);
  decompose->add_option("--light", p.light)->required()->check(CLI::ExistingFile);
  decompose->add_option("--out", p.out)->required();
  decompose->add_option("--shading-floor", decomp.shading_floor, "Minimum shading (sky units)");

  auto* eval = app.add_subcommand("eval", "Compare decomposition outputs with ground truth");
  eval->add_option("--pred", p.pred)->required()->check(CLI::ExistingDirectory);
  eval->add_option("--truth", p.truth)->required()->check(CLI::ExistingDirectory);
  eval->add_option("--report", p.report)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*run) {
      if (!*cfg_opt && !*man_opt) throw ConfigError("run needs --config or --manifest");
      PipelineConfig cfg;
      if (*man_opt) {
        const fs::path out = p.out.empty() ? fs::absolute(p.manifest).parent_path() : p.out;
        cfg = config_from_manifest(p.manifest, out, workers);
      } else {
        cfg = load_config(p.config);
        if (app.get_option("--workers")->count() > 0) cfg.workers = workers;
      }
      const RunResult r = run_pipeline(cfg);
      std::cout << "stages cached: " << r.cache_hits.size() << '\n';
      if (r.manifest.contains("ratio")) {
        std::cout << "ratio: " << r.manifest["ratio"].dump()
                  << " accepted: " << r.manifest["accepted"].dump() << '\n';
      }
      for (const auto& w : r.manifest["warnings"]) std::cerr << "warning: " << w.get<std::string>() << '\n';
      return r.exit_code;
    }
    if (*sunpos) {
      CaptureMeta meta;
      meta.latitude = lat;
      meta.longitude = lon;
      meta.timestamp_utc = UtcTime::parse(time);
      meta.validate();
      const SunDirection s = sun_direction(meta);
      print_json({{"azimuth_deg", s.azimuth_deg},
                  {"elevation_deg", s.elevation_deg},
                  {"vector", {s.vector.x(), s.vector.y(), s.vector.z()}},
                  {"below_horizon", sun_below_horizon(s)}});
      return kExitOk;
    }
    if (*synth) {
      auto spec = canonical_project(scene, seed);
      spec.settings.workers = workers == 0 ? default_workers() : workers;
      render_synthetic_project(spec, p.out);
      return kExitOk;
    }
    if (*suite) {
      generate_test_suite(seed, p.out, workers == 0 ? default_workers() : workers);
      return kExitOk;
    }
    if (*gbuffer) {
      const Project proj = load_project(p.project);
      const auto light = lighting_frame(proj.meta, compute_sun(proj.meta));
      const auto g = compute_gbuffers(proj, light, workers);
      for (std::size_t i = 0; i < g.size(); ++i) write_gbuffer(g[i], p.out / proj.images[i].stem);
      return kExitOk;
    }
    if (*refine) {
      crf.validate();
      const Project proj = load_project(p.project);
      const auto masks = refine_masks(proj, load_gbuffers(proj, p.gbuffer), crf, workers);
      for (std::size_t i = 0; i < masks.size(); ++i) {
        write_mask(masks[i], p.out / (proj.images[i].stem + ".pfm"));
      }
      return kExitOk;
    }
    if (*estimate) {
      const Project proj = load_project(p.project);
      const auto r = estimate_collection_ratio(proj, load_gbuffers(proj, p.gbuffer),
                                               load_masks(proj, p.masks), pairs, ratio_params,
                                               workers);
      write_light_json(r, p.light);
      std::cout << "ratio: [" << r.ratio.x() << ", " << r.ratio.y() << ", " << r.ratio.z()
                << "] accepted: " << (r.accepted ? "true" : "false") << '\n';
      if (!r.accepted) {
        std::cerr << "illumination ratio rejected: " << r.reason << '\n';
        return kExitRatioRejected;
      }
      return kExitOk;
    }
    if (*soften) {
      const Project proj = load_project(p.project);
      const auto light = read_light_json(p.light);
      if (!light.accepted) {
        std::cerr << "illumination ratio in " << p.light << " was rejected\n";
        return kExitRatioRejected;
      }
      const auto soft = soften_masks(proj, load_gbuffers(proj, p.gbuffer), load_masks(proj, p.masks),
                                     light, penumbra, workers);
      for (std::size_t i = 0; i < soft.size(); ++i) {
        write_pfm(soft[i], p.out / (proj.images[i].stem + ".pfm"));
      }
      return kExitOk;
    }
    if (*decompose) {
      const Project proj = load_project(p.project);
      const auto light = read_light_json(p.light);
      if (!light.accepted) {
        std::cerr << "illumination ratio in " << p.light << " was rejected\n";
        return kExitRatioRejected;
      }
      std::vector<Raster> alphas;
      for (const auto& img : proj.images) alphas.push_back(read_pfm(p.masks / (img.stem + ".pfm")));
      const auto results =
          decompose_all(proj, load_gbuffers(proj, p.gbuffer), alphas, light, decomp, workers);
      for (std::size_t i = 0; i < results.size(); ++i) {
        write_albedo_result(results[i], p.out / proj.images[i].stem);
      }
      return kExitOk;
    }
    if (*eval) {
      const json report = evaluate_outputs(p.pred, p.truth);
      if (p.report.has_parent_path()) fs::create_directories(p.report.parent_path());
      std::ofstream(p.report) << report.dump(2) << '\n';
      return kExitOk;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const StageError& e) {
    std::cerr << "stage failed: " << e.what() << '\n';
    return kExitStage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitStage;
  }
  return kExitOk;
}
