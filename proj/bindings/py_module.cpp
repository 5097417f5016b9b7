#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <utility>
#include <vector>

#include "ddlab/checkpoint.hpp"
#include "ddlab/commands.hpp"
#include "ddlab/denoiser.hpp"
#include "ddlab/metrics.hpp"
#include "ddlab/numerics.hpp"
#include "ddlab/rng.hpp"
#include "ddlab/sampler.hpp"
#include "ddlab/schedule.hpp"
#include "ddlab/toy_data.hpp"

namespace py = pybind11;
using namespace ddlab;

namespace {

using Point = std::pair<double, double>;

Point pt(Vec2 v) { return {v.x, v.y}; }
Vec2 vec(Point p) { return {p.first, p.second}; }

std::vector<Vec2> vec_list(const std::vector<Point>& pts) {
  std::vector<Vec2> out;
  out.reserve(pts.size());
  for (Point p : pts) out.push_back(vec(p));
  return out;
}

py::dict traj_dict(const Trajectory& t) {
  py::dict d;
  d["x0"] = pt(t.x0);
  d["x_init"] = pt(t.x_init);
  d["evals"] = t.eval_count;
  py::list path;
  for (const auto& [step_t, est] : dt_visualize(t)) {
    path.append(py::make_tuple(step_t, pt(est)));
  }
  d["committed_path"] = path;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() =
      "Toy-scale denoising diffusion lab: schedules, samplers, distillation "
      "artifacts, and diversity metrics on 2-D distributions.";
  m.attr("__version__") = kVersion;

  py::class_<RngStream>(m, "RngStream")
      .def(py::init<std::uint64_t, std::uint64_t>(), py::arg("seed"),
           py::arg("stream_id"))
      .def_static("restore", &RngStream::restore, py::arg("seed"),
                  py::arg("stream_id"), py::arg("counter"))
      .def("next_u64", &RngStream::next_u64)
      .def("uniform01", &RngStream::uniform01)
      .def("uniform_int", &RngStream::uniform_int, py::arg("n"))
      .def_property_readonly("seed", &RngStream::seed)
      .def_property_readonly("stream_id", &RngStream::stream_id)
      .def_property_readonly("counter", &RngStream::counter);

  m.def("gaussian_pair",
        [](RngStream& rng) { return pt(gaussian_pair(rng)); }, py::arg("rng"));

  m.def("time_embedding", [](double t_frac, int dim) {
    std::vector<double> out(static_cast<std::size_t>(dim));
    time_embedding(t_frac, out);
    return out;
  }, py::arg("t_frac"), py::arg("dim") = 32);

  py::class_<NoiseSchedule>(m, "Schedule")
      .def(py::init([](const std::string& kind, int T) {
             return make_schedule(schedule_kind_from_string(kind), T);
           }),
           py::arg("kind") = "cosine", py::arg("T") = 64)
      .def_readonly("T", &NoiseSchedule::T)
      .def_readonly("alpha_bar", &NoiseSchedule::alpha_bar)
      .def_readonly("alpha", &NoiseSchedule::alpha)
      .def_property_readonly("id", &NoiseSchedule::id);

  m.def("forward_noise",
        [](const NoiseSchedule& s, Point x0, int t, RngStream& rng) {
          NoisePair np = forward_noise(s, vec(x0), t, rng);
          return py::make_tuple(pt(np.x_t), pt(np.eps));
        },
        py::arg("schedule"), py::arg("x0"), py::arg("t"), py::arg("rng"));

  py::class_<ToyDistribution>(m, "ToyDistribution")
      .def_static("gmm_ring", &ToyDistribution::gmm_ring, py::arg("n_modes") = 8,
                  py::arg("ring_radius") = 4.0, py::arg("mode_std") = 0.15)
      .def_static("two_moons", &ToyDistribution::two_moons,
                  py::arg("radius") = 3.0, py::arg("noise_std") = 0.15)
      .def_static("spiral", &ToyDistribution::spiral, py::arg("turns") = 2.0,
                  py::arg("radius") = 4.5, py::arg("noise_std") = 0.1)
      .def_readonly("n_modes", &ToyDistribution::n_modes)
      .def_readonly("ring_radius", &ToyDistribution::ring_radius)
      .def_readonly("mode_std", &ToyDistribution::mode_std)
      .def("mode_center", [](const ToyDistribution& d, int j) {
        return pt(d.mode_center(j));
      }, py::arg("j"))
      .def_property_readonly("kind", [](const ToyDistribution& d) {
        return to_string(d.kind);
      });

  m.def("sample_truth",
        [](const ToyDistribution& d, int n, RngStream& rng) {
          std::vector<std::pair<Point, int>> out;
          for (const LabeledSample& s : sample_truth(d, n, rng)) {
            out.emplace_back(pt(s.point), s.mode_label);
          }
          return out;
        },
        py::arg("dist"), py::arg("n"), py::arg("rng"));

  m.def("oracle_posterior",
        [](const ToyDistribution& d, Point p) { return oracle_posterior(d, vec(p)); },
        py::arg("dist"), py::arg("point"));

  m.def("attribute_value",
        [](const ToyDistribution& d, Point p) { return attribute_value(d, vec(p)); },
        py::arg("dist"), py::arg("point"));

  py::class_<DenoiserModel>(m, "Model")
      .def_static(
          "random",
          [](std::vector<int> hidden, int time_embed_dim, int cond_embed_dim,
             int n_conditions, const std::string& role, std::uint64_t seed) {
            DenoiserConfig cfg;
            cfg.hidden = std::move(hidden);
            cfg.time_embed_dim = time_embed_dim;
            cfg.cond_embed_dim = cond_embed_dim;
            cfg.n_conditions = n_conditions;
            RngStream rng(seed, 0);
            return DenoiserModel::init(cfg, model_role_from_string(role), rng);
          },
          py::arg("hidden") = std::vector<int>{128, 128, 128},
          py::arg("time_embed_dim") = 32, py::arg("cond_embed_dim") = 8,
          py::arg("n_conditions") = 0, py::arg("role") = "base",
          py::arg("seed") = 0)
      .def("forward",
           [](const DenoiserModel& model, Point x, double t_frac,
              std::optional<int> cond) {
             return pt(forward(model, nullptr, vec(x), t_frac, cond));
           },
           py::arg("x"), py::arg("t_frac"), py::arg("cond") = py::none())
      .def("forward_adapted",
           [](const DenoiserModel& model, const LoraAdapter& a, Point x,
              double t_frac, std::optional<int> cond) {
             return pt(forward(model, &a, vec(x), t_frac, cond));
           },
           py::arg("adapter"), py::arg("x"), py::arg("t_frac"),
           py::arg("cond") = py::none())
      .def("save",
           [](const DenoiserModel& model, const std::string& path) {
             save_model(path, model);
           },
           py::arg("path"))
      .def_property_readonly("role", [](const DenoiserModel& model) {
        return to_string(model.role);
      })
      .def_property_readonly("param_count", &DenoiserModel::param_count)
      .def_property_readonly("hidden", [](const DenoiserModel& model) {
        return model.cfg.hidden;
      })
      .def_property_readonly("n_conditions", [](const DenoiserModel& model) {
        return model.cfg.n_conditions;
      });

  m.def("load_model", [](const std::string& path) {
    return load_model(path).model;
  }, py::arg("path"));

  py::class_<LoraAdapter>(m, "Adapter")
      .def_readonly("rank", &LoraAdapter::rank)
      .def_readwrite("scale", &LoraAdapter::scale)
      .def_readonly("target_layers", &LoraAdapter::target_layers)
      .def("at_scale", &LoraAdapter::at_scale, py::arg("scale"));

  m.def("load_adapter", [](const std::string& path) {
    return load_adapter(path).adapter;
  }, py::arg("path"));

  m.def("merge_adapter", &merge_adapter, py::arg("model"), py::arg("adapter"),
        py::arg("scale"));

  m.def("ddim_rollout",
        [](const DenoiserModel& model, const NoiseSchedule& sched, int n_steps,
           RngStream& rng, std::optional<int> cond, double guidance,
           bool stochastic) {
          SamplerConfig cfg;
          cfg.grid = StepGrid::uniform(sched, n_steps);
          cfg.cond = cond;
          cfg.guidance = guidance;
          cfg.stochastic = stochastic;
          return traj_dict(sample(model, nullptr, sched, cfg, rng));
        },
        py::arg("model"), py::arg("schedule"), py::arg("n_steps"), py::arg("rng"),
        py::arg("cond") = py::none(), py::arg("guidance") = 1.0,
        py::arg("stochastic") = false);

  m.def("hybrid_rollout",
        [](const DenoiserModel& base_model, const DenoiserModel& distilled_model,
           const NoiseSchedule& sched, int n_steps, int k, int substeps,
           RngStream& rng, std::optional<int> cond, double guidance) {
          SamplerConfig cfg;
          cfg.grid = StepGrid::uniform(sched, n_steps);
          cfg.transition_k = k;
          cfg.base_substeps = substeps;
          cfg.cond = cond;
          cfg.guidance = guidance;
          return traj_dict(hybrid_sample(base_model, distilled_model, sched, cfg, rng));
        },
        py::arg("base"), py::arg("distilled"), py::arg("schedule"),
        py::arg("n_steps"), py::arg("k"), py::arg("substeps"), py::arg("rng"),
        py::arg("cond") = py::none(), py::arg("guidance") = 1.0);

  m.def("skip_first_rollout",
        [](const DenoiserModel& model, const NoiseSchedule& sched, int n_steps,
           RngStream& rng) {
          SamplerConfig cfg;
          cfg.grid = StepGrid::uniform(sched, n_steps);
          return traj_dict(skip_first_sample(model, nullptr, sched, cfg, rng));
        },
        py::arg("model"), py::arg("schedule"), py::arg("n_steps"), py::arg("rng"));

  m.def("psd_sqrt", [](double a, double b, double c, double d) {
    Mat2 s = psd_sqrt({a, b, c, d});
    return py::make_tuple(s.a, s.b, s.c, s.d);
  }, py::arg("a"), py::arg("b"), py::arg("c"), py::arg("d"));

  m.def("batch_mean_cov", [](const std::vector<Point>& pts) {
    std::vector<Vec2> v = vec_list(pts);
    BatchStats st = batch_stats(v);
    return py::make_tuple(pt(st.mean),
                          py::make_tuple(st.cov.a, st.cov.b, st.cov.c, st.cov.d));
  }, py::arg("points"));

  m.def("sample_diversity", [](const std::vector<Point>& pts) {
    std::vector<Vec2> v = vec_list(pts);
    return sample_diversity(v);
  }, py::arg("points"));

  m.def("frechet2", [](const std::vector<Point>& a, const std::vector<Point>& b) {
    std::vector<Vec2> va = vec_list(a), vb = vec_list(b);
    return frechet2(std::span<const Vec2>(va), std::span<const Vec2>(vb));
  }, py::arg("a"), py::arg("b"));

  m.def("mode_coverage",
        [](const std::vector<Point>& pts, const ToyDistribution& d) {
          std::vector<Vec2> v = vec_list(pts);
          ModeStats st = mode_stats(v, d);
          py::dict out;
          out["counts"] = st.counts;
          out["covered_modes"] = st.covered_modes;
          out["coverage"] = st.coverage;
          out["within_mode_std"] = st.within_mode_std;
          return out;
        },
        py::arg("points"), py::arg("dist"));

  m.def("is_analogue",
        [](const std::vector<Point>& pts, const ToyDistribution& d) {
          std::vector<Vec2> v = vec_list(pts);
          return is_analogue(v, d);
        },
        py::arg("points"), py::arg("dist"));
}
