#include "ddlab/commands.hpp"

#include <fstream>
#include <iostream>
#include <sstream>

#include "ddlab/checkpoint.hpp"
#include "ddlab/csv.hpp"
#include "ddlab/errors.hpp"
#include "ddlab/metrics.hpp"
#include "ddlab/parallel.hpp"
#include "ddlab/svg.hpp"

namespace ddlab {

namespace {

using nlohmann::json;

json stream_table() {
  return {{"model_init", kStreamModelInit},
          {"train_loop", kStreamTrainLoop},
          {"distill_loop", kStreamDistillLoop},
          {"adapter_init", kStreamAdapterInit},
          {"adapter_loop", kStreamAdapterLoop},
          {"distill_pool", kStreamDistillPool},
          {"truth_data", kStreamTruthData},
          {"eval_chain_base", kStreamEvalChain},
          {"dt_chain_base", kStreamDtChain},
          {"transfer_chain_base", kStreamTransferChain},
          {"probe_chain_base", kStreamProbeChain}};
}

void write_manifest(const RunConfig& cfg, const std::string& command,
                    json extra) {
  json m;
  m["command"] = command;
  m["version"] = kVersion;
  m["config"] = cfg.as_json();
  m["config_hash"] = config_hash(cfg);
  m["seed"] = cfg.seed;
  m["streams"] = stream_table();
  for (auto& [k, v] : extra.items()) m[k] = v;
  write_file_atomic(cfg.out_dir / ("manifest_" + command + ".json"),
                    m.dump(2) + "\n");
}

DenoiserModel load_role(const RunConfig& cfg, ModelRole role) {
  const std::string& rel = role == ModelRole::base ? cfg.base_model_path
                                                   : cfg.distilled_model_path;
  LoadedModel lm = load_model(cfg.resolve(rel));
  if (lm.model.role != role) {
    throw BadCheckpoint(cfg.resolve(rel).string() + ": expected a " +
                        to_string(role) + " model");
  }
  return std::move(lm.model);
}

std::vector<LabeledSample> truth_reference(const RunConfig& cfg) {
  RngStream rng(cfg.seed, kStreamTruthData);
  return sample_truth(cfg.data, cfg.n_reference, rng);
}

std::vector<Vec2> points_only(const std::vector<LabeledSample>& s) {
  std::vector<Vec2> out;
  out.reserve(s.size());
  for (const auto& ls : s) out.push_back(ls.point);
  return out;
}

std::vector<Vec2> endpoints(const std::vector<Trajectory>& trajs) {
  std::vector<Vec2> out;
  out.reserve(trajs.size());
  for (const auto& t : trajs) out.push_back(t.x0);
  return out;
}

// One evaluation arm: n chains on per-chain streams (seed, offset + i).
// The same offset across arms means identical initial noise everywhere.
std::vector<Trajectory> run_arm(const std::string& arm,
                                const DenoiserModel* base_model,
                                const DenoiserModel* distilled_model,
                                const NoiseSchedule& sched, const RunConfig& cfg,
                                int n, std::uint64_t stream_offset) {
  SamplerConfig scfg;
  scfg.cond = cfg.arm.cond;
  scfg.guidance = cfg.arm.guidance;
  scfg.transition_k = cfg.arm.transition_k;
  scfg.base_substeps = cfg.arm.base_substeps;
  scfg.x0_clip = cfg.x0_clip;
  if (arm == "base") {
    scfg.grid = StepGrid::uniform(sched, cfg.arm.base_steps);
    scfg.stochastic = cfg.arm.stochastic_base;
  } else {
    scfg.grid = StepGrid::uniform(sched, cfg.arm.distilled_steps);
    // The hybrid's leading steps belong to the base model and keep its
    // sampling procedure; distilled-model steps are always deterministic.
    scfg.stochastic = arm == "hybrid" && cfg.arm.stochastic_base;
  }
  if (arm != "base" && arm != "hybrid") scfg.guidance = 1.0;

  int n_cond = (base_model ? base_model : distilled_model)->cfg.n_conditions;
  std::vector<Trajectory> trajs(static_cast<std::size_t>(n));
  parallel_chunks(static_cast<std::size_t>(n), kGradChunks,
                  [&](int, std::size_t begin, std::size_t end) {
                    for (std::size_t i = begin; i < end; ++i) {
                      RngStream rng(cfg.seed, stream_offset + i);
                      SamplerConfig local = scfg;
                      if (cfg.arm.cond_balanced) {
                        local.cond = static_cast<int>(
                            i % static_cast<std::size_t>(n_cond));
                      }
                      if (arm == "base") {
                        trajs[i] = sample(*base_model, nullptr, sched, local, rng);
                      } else if (arm == "distilled") {
                        trajs[i] = sample(*distilled_model, nullptr, sched, local, rng);
                      } else if (arm == "hybrid") {
                        trajs[i] = hybrid_sample(*base_model, *distilled_model,
                                                 sched, local, rng);
                      } else if (arm == "skip_first") {
                        trajs[i] = skip_first_sample(*distilled_model, nullptr,
                                                     sched, local, rng);
                      } else {
                        throw UnsupportedKind("unknown arm: " + arm);
                      }
                    }
                  });
  return trajs;
}

void save_loss_csv(const std::filesystem::path& path,
                   const std::vector<std::pair<int, double>>& log) {
  CsvWriter csv({"iteration", "loss"});
  for (const auto& [it, loss] : log) {
    csv.add_row({std::to_string(it), fmt_double(loss)});
  }
  csv.save(path);
}

}  // namespace

void cmd_gen_data(const RunConfig& cfg) {
  std::vector<LabeledSample> pts = truth_reference(cfg);
  CsvWriter csv({"x", "y", "mode"});
  for (const auto& s : pts) {
    csv.add_row({fmt_double(s.point.x), fmt_double(s.point.y),
                 std::to_string(s.mode_label)});
  }
  csv.save(cfg.out_dir / "truth_points.csv");

  SvgCanvas canvas;
  canvas.title("truth samples (" + to_string(cfg.data.kind) + ")");
  std::vector<Vec2> shown;
  for (std::size_t i = 0; i < pts.size() && shown.size() < 4000; ++i) {
    shown.push_back(pts[i].point);
  }
  canvas.scatter(shown, palette::truth);
  if (cfg.data.kind == ToyKind::gmm_ring) {
    for (int j = 0; j < cfg.data.n_modes; ++j) {
      canvas.marker(cfg.data.mode_center(j), "#333333");
    }
  }
  canvas.save(cfg.out_dir / "truth.svg");

  write_manifest(cfg, "gen-data",
                 {{"outputs", {"truth_points.csv", "truth.svg"}},
                  {"n_points", cfg.n_reference}});
}

void cmd_train_base(const RunConfig& cfg) {
  NoiseSchedule sched = cfg.make_noise_schedule();
  TrainStats stats;
  DenoiserModel model =
      train_base(cfg.data, sched, cfg.model, cfg.train, cfg.seed, &stats);
  json extra = {{"schedule", sched.id()},
                {"seed", cfg.seed},
                {"train", cfg.as_json()["train"]}};
  save_model(cfg.resolve(cfg.base_model_path), model, extra);
  save_loss_csv(cfg.out_dir / "train_loss.csv", stats.loss_log);

  std::vector<double> xs, ys;
  for (const auto& [it, loss] : stats.loss_log) {
    xs.push_back(it);
    ys.push_back(loss);
  }
  SvgChart chart("iteration", "batch loss");
  chart.add_series("denoising loss", palette::base, xs, ys);
  chart.save(cfg.out_dir / "train_loss.svg");

  write_manifest(cfg, "train-base",
                 {{"outputs", {cfg.base_model_path, "train_loss.csv", "train_loss.svg"}},
                  {"final_loss", stats.final_loss},
                  {"first_logged_loss", stats.first_logged_loss}});
}

void cmd_distill(const RunConfig& cfg) {
  NoiseSchedule sched = cfg.make_noise_schedule();
  DenoiserModel teacher = load_role(cfg, ModelRole::base);
  DistillStats stats;
  DistillConfig dcfg = cfg.distill;
  dcfg.x0_clip = cfg.x0_clip;  // one projection radius for the whole run
  DenoiserModel student =
      cfg.distill.method == DistillMethod::progressive
          ? distill_progressive(teacher, sched, cfg.data, dcfg, cfg.seed, &stats)
          : distill_regression(teacher, sched, dcfg, cfg.seed, &stats);

  json extra = {{"schedule", sched.id()},
                {"seed", cfg.seed},
                {"method", to_string(cfg.distill.method)},
                {"distill", cfg.as_json()["distill"]}};
  save_model(cfg.resolve(cfg.distilled_model_path), student, extra);

  CsvWriter csv({"round", "iteration", "loss"});
  for (const auto& [round, it, loss] : stats.loss_log) {
    csv.add_row({std::to_string(round), std::to_string(it), fmt_double(loss)});
  }
  csv.save(cfg.out_dir / "distill_loss.csv");

  DistillEvalReport rep = eval_distillation(
      student, StepGrid::uniform(sched, cfg.distill.target_steps), teacher,
      StepGrid::uniform(sched, cfg.distill.teacher_steps), sched, 256, cfg.seed,
      cfg.x0_clip);

  write_manifest(cfg, "distill",
                 {{"outputs", {cfg.distilled_model_path, "distill_loss.csv"}},
                  {"final_loss", stats.final_loss},
                  {"endpoint_mse_vs_teacher", rep.endpoint_mse}});
}

void cmd_train_lora(const RunConfig& cfg) {
  NoiseSchedule sched = cfg.make_noise_schedule();
  ModelRole role = model_role_from_string(cfg.adapter_on);
  DenoiserModel model = load_role(cfg, role);
  TrainStats stats;
  LoraAdapter adapter =
      train_slider(model, cfg.data, sched, cfg.slider, cfg.seed, &stats);

  const std::string& rel = role == ModelRole::base ? cfg.adapter_base_path
                                                   : cfg.adapter_distilled_path;
  json extra = {{"schedule", sched.id()},
                {"seed", cfg.seed},
                {"slider", cfg.as_json()["slider"]},
                {"attribute_direction",
                 {cfg.data.attribute_direction.x, cfg.data.attribute_direction.y}}};
  save_adapter(cfg.resolve(rel), adapter, model, extra);
  save_loss_csv(cfg.out_dir / ("slider_loss_" + cfg.adapter_on + ".csv"),
                stats.loss_log);

  write_manifest(cfg, "train-lora",
                 {{"outputs", {rel, "slider_loss_" + cfg.adapter_on + ".csv"}},
                  {"adapter_on", cfg.adapter_on},
                  {"final_loss", stats.final_loss}});
}

void cmd_sample(const RunConfig& cfg) {
  NoiseSchedule sched = cfg.make_noise_schedule();
  const std::string& arm = cfg.sample_arm;
  DenoiserModel base_model, distilled_model;
  if (arm == "base" || arm == "hybrid") base_model = load_role(cfg, ModelRole::base);
  if (arm != "base") distilled_model = load_role(cfg, ModelRole::distilled);

  std::vector<Trajectory> trajs = run_arm(arm, &base_model, &distilled_model,
                                          sched, cfg, cfg.arm.n, kStreamEvalChain);
  CsvWriter csv({"chain", "x", "y", "evals"});
  for (std::size_t i = 0; i < trajs.size(); ++i) {
    csv.add_row({std::to_string(i), fmt_double(trajs[i].x0.x),
                 fmt_double(trajs[i].x0.y), std::to_string(trajs[i].eval_count)});
  }
  csv.save(cfg.out_dir / ("samples_" + arm + ".csv"));

  SvgCanvas canvas;
  canvas.title("samples: " + arm);
  canvas.scatter(endpoints(trajs), palette::for_arm(arm));
  canvas.save(cfg.out_dir / ("samples_" + arm + ".svg"));

  write_manifest(cfg, "sample",
                 {{"outputs", {"samples_" + arm + ".csv", "samples_" + arm + ".svg"}},
                  {"arm", arm},
                  {"n", cfg.arm.n},
                  {"evals_per_chain", trajs.empty() ? 0 : trajs[0].eval_count}});
}

void cmd_dt_viz(const RunConfig& cfg) {
  NoiseSchedule sched = cfg.make_noise_schedule();
  DenoiserModel base_model = load_role(cfg, ModelRole::base);
  DenoiserModel distilled_model = load_role(cfg, ModelRole::distilled);

  // Commitment readouts need the deterministic sampler on every arm.
  RunConfig dcfg = cfg;
  dcfg.arm.stochastic_base = false;
  int n = cfg.dt_chains;
  std::vector<std::string> arms{"base", "distilled", "hybrid"};
  CsvWriter csv({"arm", "record", "fraction", "value", "raw_initial"});
  SvgChart chart("completed fraction of the chain", "normalized commitment spread");
  json curves;

  std::vector<Trajectory> base_trajs;
  for (const std::string& arm : arms) {
    std::vector<Trajectory> trajs = run_arm(arm, &base_model, &distilled_model,
                                            sched, dcfg, n, kStreamDtChain);
    DtCurve curve = dt_curve(trajs, sched);
    for (std::size_t i = 0; i < curve.values.size(); ++i) {
      csv.add_row({arm, std::to_string(i), fmt_double(curve.fractions[i]),
                   fmt_double(curve.values[i]), fmt_double(curve.raw_initial)});
    }
    chart.add_series(arm, palette::for_arm(arm), curve.fractions, curve.values);
    curves[arm] = {{"fractions", curve.fractions}, {"values", curve.values}};
    if (arm == "base") base_trajs = std::move(trajs);
  }
  csv.save(cfg.out_dir / "dt_curve.csv");
  chart.save(cfg.out_dir / "dt_curve.svg");

  // A few committed-sample paths, to make the early-commitment story visible.
  SvgCanvas canvas;
  canvas.title("committed-sample paths (base, 8 chains)");
  for (int c = 0; c < 8 && c < static_cast<int>(base_trajs.size()); ++c) {
    auto path = dt_visualize(base_trajs[static_cast<std::size_t>(c)]);
    std::vector<Vec2> pts;
    for (const auto& [t, p] : path) pts.push_back(p);
    canvas.polyline(pts, palette::base, 1.0, 0.7);
    canvas.marker(pts.back(), palette::base, 3.0);
  }
  canvas.save(cfg.out_dir / "dt_paths.svg");

  write_manifest(cfg, "dt-viz",
                 {{"outputs", {"dt_curve.csv", "dt_curve.svg", "dt_paths.svg"}},
                  {"n_chains", n},
                  {"curves", curves}});
}

void cmd_eval(const RunConfig& cfg) {
  NoiseSchedule sched = cfg.make_noise_schedule();
  DenoiserModel base_model = load_role(cfg, ModelRole::base);
  DenoiserModel distilled_model = load_role(cfg, ModelRole::distilled);
  std::vector<Vec2> truth = points_only(truth_reference(cfg));

  std::vector<std::string> arms{"base", "distilled", "hybrid", "skip_first"};
  CsvWriter csv({"arm", "n", "evals_per_chain", "diversity", "covered_modes",
                 "coverage", "within_mode_std", "is_value", "frechet2",
                 "mean_x", "mean_y", "cov_xx", "cov_xy", "cov_yy"});
  json report;
  report["config_hash"] = config_hash(cfg);
  report["seed"] = cfg.seed;
  report["n_truth"] = cfg.n_reference;

  SvgCanvas canvas;
  canvas.title("evaluation arms");
  {
    std::vector<Vec2> shown(truth.begin(),
                            truth.begin() + std::min<std::size_t>(2000, truth.size()));
    canvas.scatter(shown, palette::truth, 1.5, 0.4);
  }

  for (const std::string& arm : arms) {
    std::vector<Trajectory> trajs = run_arm(arm, &base_model, &distilled_model,
                                            sched, cfg, cfg.arm.n, kStreamEvalChain);
    std::vector<Vec2> pts = endpoints(trajs);
    MetricsReport r = metrics_report(pts, cfg.data, truth);
    if (cfg.arm.cond_balanced) {
      // Diversity under shared conditions: chains that received the same
      // condition form one group, and the reported number is the average of
      // the per-group mean pairwise distances.
      std::vector<int> labels(pts.size());
      for (std::size_t i = 0; i < pts.size(); ++i) {
        labels[i] = static_cast<int>(
            i % static_cast<std::size_t>(base_model.cfg.n_conditions));
      }
      r.diversity = balanced_diversity(pts, labels);
    }
    int evals = trajs.empty() ? 0 : trajs[0].eval_count;
    csv.add_row({arm, std::to_string(r.n), std::to_string(evals),
                 fmt_double(r.diversity), std::to_string(r.modes.covered_modes),
                 fmt_double(r.modes.coverage), fmt_double(r.modes.within_mode_std),
                 fmt_double(r.is_value), fmt_double(r.frechet2_to_truth),
                 fmt_double(r.stats.mean.x), fmt_double(r.stats.mean.y),
                 fmt_double(r.stats.cov.a), fmt_double(r.stats.cov.b),
                 fmt_double(r.stats.cov.d)});
    report["arms"][arm] = {{"n", r.n},
                           {"evals_per_chain", evals},
                           {"diversity", r.diversity},
                           {"coverage", r.modes.coverage},
                           {"within_mode_std", r.modes.within_mode_std},
                           {"is_value", r.is_value},
                           {"frechet2", r.frechet2_to_truth}};
    canvas.scatter(pts, palette::for_arm(arm), 2.0, 0.5);
  }
  csv.save(cfg.out_dir / "metrics.csv");
  write_file_atomic(cfg.out_dir / "report.json", report.dump(2) + "\n");
  canvas.save(cfg.out_dir / "scatter_arms.svg");

  write_manifest(cfg, "eval",
                 {{"outputs", {"metrics.csv", "report.json", "scatter_arms.svg"}},
                  {"arms", arms},
                  {"n_per_arm", cfg.arm.n}});
}

void cmd_sweep(const RunConfig& cfg) {
  NoiseSchedule sched = cfg.make_noise_schedule();
  DenoiserModel base_model = load_role(cfg, ModelRole::base);
  DenoiserModel distilled_model = load_role(cfg, ModelRole::distilled);
  std::vector<Vec2> truth = points_only(truth_reference(cfg));

  CsvWriter csv({"section", "k", "substeps", "guidance", "n", "evals_per_chain",
                 "diversity", "frechet2"});
  std::vector<double> k_xs, k_div, k_fre;

  // Under balanced conditioning the headline number is the shared-condition
  // diversity; pooled pairwise distance would be dominated by the gaps
  // between modes instead of the spread the sweep is probing.
  auto arm_diversity = [&](const std::vector<Vec2>& pts) {
    if (!cfg.arm.cond_balanced) return sample_diversity(pts);
    std::vector<int> labels(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) {
      labels[i] = static_cast<int>(
          i % static_cast<std::size_t>(base_model.cfg.n_conditions));
    }
    return balanced_diversity(pts, labels);
  };

  RunConfig scfg = cfg;
  scfg.arm.n = cfg.sweep.n;
  for (int k : cfg.sweep.ks) {
    if (k < 0 || k > cfg.arm.distilled_steps) {
      throw ConfigError("config: sweep.ks entry outside [0, distilled_steps]");
    }
    scfg.arm.transition_k = k;
    scfg.arm.base_substeps = 1;
    std::vector<Trajectory> trajs =
        run_arm("hybrid", &base_model, &distilled_model, sched, scfg,
                cfg.sweep.n, kStreamEvalChain);
    std::vector<Vec2> pts = endpoints(trajs);
    double div = arm_diversity(pts);
    double fre = frechet2(pts, truth);
    csv.add_row({"k", std::to_string(k), "1", fmt_double(scfg.arm.guidance),
                 std::to_string(cfg.sweep.n), std::to_string(trajs[0].eval_count),
                 fmt_double(div), fmt_double(fre)});
    k_xs.push_back(k);
    k_div.push_back(div);
    k_fre.push_back(fre);
  }

  std::vector<double> m_xs, m_div;
  for (int m : cfg.sweep.substeps) {
    scfg.arm.transition_k = 1;
    scfg.arm.base_substeps = m;
    std::vector<Trajectory> trajs =
        run_arm("hybrid", &base_model, &distilled_model, sched, scfg,
                cfg.sweep.n, kStreamEvalChain);
    std::vector<Vec2> pts = endpoints(trajs);
    double div = arm_diversity(pts);
    double fre = frechet2(pts, truth);
    csv.add_row({"substeps", "1", std::to_string(m), fmt_double(scfg.arm.guidance),
                 std::to_string(cfg.sweep.n), std::to_string(trajs[0].eval_count),
                 fmt_double(div), fmt_double(fre)});
    m_xs.push_back(m);
    m_div.push_back(div);
  }

  // Guidance sweep: every chain shares one condition so the weight is the
  // only thing changing the spread.
  std::vector<double> w_xs, w_div;
  RunConfig wcfg = cfg;
  wcfg.arm.n = cfg.sweep.n;
  wcfg.arm.cond = cfg.arm.cond ? cfg.arm.cond : std::optional<int>(0);
  wcfg.arm.cond_balanced = false;
  wcfg.arm.stochastic_base = false;
  for (double w : cfg.sweep.ws) {
    wcfg.arm.guidance = w;
    std::vector<Trajectory> trajs = run_arm("base", &base_model, &distilled_model,
                                            sched, wcfg, cfg.sweep.n, kStreamEvalChain);
    std::vector<Vec2> pts = endpoints(trajs);
    double div = sample_diversity(pts);
    double fre = frechet2(pts, truth);
    csv.add_row({"guidance", "0", "0", fmt_double(w), std::to_string(cfg.sweep.n),
                 std::to_string(trajs[0].eval_count), fmt_double(div),
                 fmt_double(fre)});
    w_xs.push_back(w);
    w_div.push_back(div);
  }

  csv.save(cfg.out_dir / "sweep.csv");
  SvgChart kchart("base-handled leading steps k", "sample diversity");
  kchart.add_series("diversity", palette::hybrid, k_xs, k_div);
  kchart.save(cfg.out_dir / "sweep_k_diversity.svg");
  SvgChart fchart("base-handled leading steps k", "squared Frechet distance to truth");
  fchart.add_series("frechet2", palette::hybrid, k_xs, k_fre);
  fchart.save(cfg.out_dir / "sweep_k_frechet.svg");
  SvgChart mchart("sub-steps per base-handled step", "sample diversity");
  mchart.add_series("diversity", palette::base, m_xs, m_div);
  mchart.save(cfg.out_dir / "sweep_substeps.svg");
  SvgChart wchart("guidance weight", "sample diversity");
  wchart.add_series("diversity", palette::base, w_xs, w_div);
  wchart.save(cfg.out_dir / "sweep_guidance.svg");

  write_manifest(cfg, "sweep",
                 {{"outputs",
                   {"sweep.csv", "sweep_k_diversity.svg", "sweep_k_frechet.svg",
                    "sweep_substeps.svg", "sweep_guidance.svg"}}});
}

void cmd_control_transfer(const RunConfig& cfg) {
  NoiseSchedule sched = cfg.make_noise_schedule();
  DenoiserModel base_model = load_role(cfg, ModelRole::base);
  DenoiserModel distilled_model = load_role(cfg, ModelRole::distilled);
  LoadedAdapter a_base = load_adapter(cfg.resolve(cfg.adapter_base_path));
  LoadedAdapter a_dist = load_adapter(cfg.resolve(cfg.adapter_distilled_path));

  StepGrid grid_base = StepGrid::uniform(sched, cfg.arm.base_steps);
  StepGrid grid_dist = StepGrid::uniform(sched, cfg.arm.distilled_steps);

  TransferReport fwd = transfer_slider(a_base.adapter, base_model, grid_base,
                                       distilled_model, grid_dist, sched,
                                       cfg.data, cfg.transfer_n,
                                       cfg.transfer_scales, cfg.seed,
                                       cfg.x0_clip);
  TransferReport rev = transfer_slider(a_dist.adapter, distilled_model, grid_dist,
                                       base_model, grid_base, sched, cfg.data,
                                       cfg.transfer_n, cfg.transfer_scales,
                                       cfg.seed, cfg.x0_clip);

  CsvWriter csv({"direction", "scale", "source_mean", "target_mean",
                 "source_shift", "target_shift"});
  auto emit = [&csv](const std::string& dir, const TransferReport& r) {
    for (std::size_t i = 0; i < r.scales.size(); ++i) {
      csv.add_row({dir, fmt_double(r.scales[i]), fmt_double(r.source_means[i]),
                   fmt_double(r.target_means[i]), fmt_double(r.source_shifts[i]),
                   fmt_double(r.target_shifts[i])});
    }
  };
  emit("base_to_distilled", fwd);
  emit("distilled_to_base", rev);
  csv.save(cfg.out_dir / "transfer.csv");

  json rep = {{"config_hash", config_hash(cfg)},
              {"n_per_cell", cfg.transfer_n},
              {"base_to_distilled",
               {{"source_shift", fwd.source_shift},
                {"target_shift", fwd.target_shift},
                {"transfer_ratio", fwd.transfer_ratio},
                {"ratio_defined", fwd.ratio_defined}}},
              {"distilled_to_base",
               {{"source_shift", rev.source_shift},
                {"target_shift", rev.target_shift},
                {"transfer_ratio", rev.transfer_ratio},
                {"ratio_defined", rev.ratio_defined}}}};
  write_file_atomic(cfg.out_dir / "transfer_report.json", rep.dump(2) + "\n");

  SvgChart chart("adapter scale", "mean attribute value");
  chart.add_series("base + its adapter", palette::base, fwd.scales, fwd.source_means);
  chart.add_series("distilled + base adapter", palette::distilled, fwd.scales,
                   fwd.target_means);
  chart.add_series("distilled + its adapter", palette::hybrid, rev.scales,
                   rev.source_means);
  chart.add_series("base + distilled adapter", palette::adapter, rev.scales,
                   rev.target_means);
  chart.save(cfg.out_dir / "transfer.svg");

  write_manifest(cfg, "control-transfer",
                 {{"outputs", {"transfer.csv", "transfer_report.json", "transfer.svg"}},
                  {"forward_ratio", fwd.transfer_ratio},
                  {"reverse_ratio", rev.transfer_ratio}});
}

namespace {

std::string csv_to_markdown(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) return "";
  std::string line, out;
  bool header = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::string row = "|";
    std::size_t cols = 0;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      row += " " + cell + " |";
      ++cols;
    }
    out += row + "\n";
    if (header) {
      out += "|";
      for (std::size_t i = 0; i < cols; ++i) out += " --- |";
      out += "\n";
      header = false;
    }
  }
  return out;
}

}  // namespace

void cmd_report(const RunConfig& cfg) {
  struct Entry {
    const char* file;
    const char* heading;
  };
  const Entry tables[] = {{"metrics.csv", "Evaluation arms"},
                          {"sweep.csv", "Sweeps"},
                          {"transfer.csv", "Control-adapter transfer"},
                          {"dt_curve.csv", "Commitment curves"}};
  std::string md = "# Run report\n\n";
  md += "- config hash: `" + config_hash(cfg) + "`\n";
  md += "- seed: " + std::to_string(cfg.seed) + "\n\n";

  bool any = false;
  for (const Entry& e : tables) {
    std::string table = csv_to_markdown(cfg.out_dir / e.file);
    if (table.empty()) continue;
    any = true;
    md += std::string("## ") + e.heading + "\n\n" + table + "\n";
  }
  std::string figs;
  for (const char* f :
       {"truth.svg", "scatter_arms.svg", "dt_curve.svg", "dt_paths.svg",
        "sweep_k_diversity.svg", "sweep_k_frechet.svg", "sweep_substeps.svg",
        "sweep_guidance.svg", "transfer.svg", "train_loss.svg"}) {
    if (std::filesystem::exists(cfg.out_dir / f)) {
      figs += std::string("- ![](") + f + ")\n";
      any = true;
    }
  }
  if (!figs.empty()) md += "## Figures\n\n" + figs + "\n";
  if (!any) {
    throw MissingArtifact("report: no artifacts found in " + cfg.out_dir.string());
  }
  write_file_atomic(cfg.out_dir / "summary.md", md);
  write_manifest(cfg, "report", {{"outputs", {"summary.md"}}});
}

int run_command(const std::string& name, const RunConfig& cfg) {
  try {
    if (name == "gen-data") cmd_gen_data(cfg);
    else if (name == "train-base") cmd_train_base(cfg);
    else if (name == "distill") cmd_distill(cfg);
    else if (name == "train-lora") cmd_train_lora(cfg);
    else if (name == "sample") cmd_sample(cfg);
    else if (name == "dt-viz") cmd_dt_viz(cfg);
    else if (name == "eval") cmd_eval(cfg);
    else if (name == "sweep") cmd_sweep(cfg);
    else if (name == "control-transfer") cmd_control_transfer(cfg);
    else if (name == "report") cmd_report(cfg);
    else {
      std::cerr << "unknown command: " << name << "\n";
      return 2;
    }
  } catch (const ConfigError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  } catch (const MissingArtifact& e) {
    std::cerr << e.what() << "\n";
    return 3;
  } catch (const BadCheckpoint& e) {
    std::cerr << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace ddlab
