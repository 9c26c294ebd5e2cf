#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "glora/adapters.hpp"
#include "glora/bundle.hpp"
#include "glora/client.hpp"
#include "glora/experiments.hpp"
#include "glora/korean.hpp"
#include "glora/metrics.hpp"
#include "glora/model.hpp"
#include "glora/server.hpp"
#include "glora/synth.hpp"
#include "glora/tensor.hpp"
#include "glora/trainer.hpp"

namespace py = pybind11;
using namespace glora;

namespace {

Tensor tensor_from_array(py::array_t<double, py::array::c_style | py::array::forcecast> arr) {
  Shape shape;
  for (py::ssize_t i = 0; i < arr.ndim(); ++i) shape.push_back(static_cast<int>(arr.shape(i)));
  std::vector<double> values(arr.data(), arr.data() + arr.size());
  return Tensor::from_values(std::move(shape), std::move(values));
}

py::array_t<double> array_from_tensor(const Tensor& t) {
  std::vector<py::ssize_t> shape;
  for (int d : t.shape()) shape.push_back(d);
  py::array_t<double> out(shape);
  std::copy(t.values().begin(), t.values().end(), out.mutable_data());
  return out;
}

char32_t single_codepoint(const std::string& s) {
  auto cps = utf8_decode(s);
  if (cps.size() != 1) throw std::invalid_argument("expected a single character");
  return cps[0];
}

PointParams point_params_from_dict(AdapterKind kind, const py::dict& d) {
  auto get = [&](const char* key) { return tensor_from_array(d[key].cast<py::array>()); };
  auto get_glu = [&](const std::string& role) -> GluParams {
    return {get((role + ".wv").c_str()), get((role + ".bv").c_str()),
            get((role + ".wg").c_str()), get((role + ".bg").c_str())};
  };
  PointParams p;
  p.a = get("A");
  p.b = get("B");
  switch (kind) {
    case AdapterKind::Lora: break;
    case AdapterKind::Glora1:
      p.glu_x = get_glu("glu_x");
      p.glu_h = get_glu("glu_h");
      break;
    case AdapterKind::Glora2:
      p.glu_in = get_glu("glu_in");
      p.glu_out = get_glu("glu_out");
      break;
    case AdapterKind::Glora3:
      p.glu_mid = get_glu("glu_mid");
      break;
  }
  return p;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Code-switching ASR adapters, metrics, and serving protocol";
  m.attr("__version__") = "0.1.0";

  // --- hangul / tokens ---
  py::class_<JamoTriple>(m, "JamoTriple")
      .def_readonly("choseong", &JamoTriple::choseong)
      .def_readonly("jungseong", &JamoTriple::jungseong)
      .def_readonly("jongseong", &JamoTriple::jongseong)
      .def("__repr__", [](const JamoTriple& t) {
        return "JamoTriple(" + std::to_string(t.choseong) + ", " + std::to_string(t.jungseong) +
               ", " + std::to_string(t.jongseong) + ")";
      });

  m.def("decompose_syllable",
        [](const std::string& ch) { return decompose_syllable(single_codepoint(ch)); });
  m.def("compose_syllable", [](int cho, int jung, int jong) {
    return utf8_encode(compose_syllable({cho, jung, jong}));
  });
  m.def("to_jamo_sequence", [](const std::string& text, const std::string& lineup) {
    return to_jamo_sequence(text, lineup_from_string(lineup));
  }, py::arg("text"), py::arg("lineup") = "compatibility");
  m.def("normalize_jamo", [](const std::string& text, const std::string& lineup) {
    return normalize_jamo(text, lineup_from_string(lineup));
  }, py::arg("text"), py::arg("lineup") = "compatibility");

  py::class_<TokenTable>(m, "TokenTable")
      .def(py::init([](const std::string& mode) { return TokenTable(lineup_from_string(mode)); }),
           py::arg("mode") = "compatibility")
      .def("extend", &TokenTable::extend)
      .def("encode", &TokenTable::encode)
      .def("decode", &TokenTable::decode)
      .def("normalize", &TokenTable::normalize)
      .def("token_of", &TokenTable::token_of)
      .def("id_of", &TokenTable::id_of)
      .def("contains", &TokenTable::contains)
      .def("save", &TokenTable::save)
      .def_static("load", &TokenTable::load)
      .def_property_readonly("mode", [](const TokenTable& t) { return lineup_to_string(t.mode()); })
      .def("__len__", &TokenTable::size);

  // --- metrics ---
  m.def("edit_distance", [](const std::vector<std::string>& ref, const std::vector<std::string>& hyp) {
    EditCounts c = edit_distance(ref, hyp);
    return py::make_tuple(c.sub, c.del, c.ins);
  });
  m.def("rate", [](const std::string& ref, const std::string& hyp, const std::string& unit,
                   const std::string& lineup) {
    RateRow r = rate(ref, hyp, unit_from_string(unit), lineup_from_string(lineup));
    py::dict d;
    d["unit"] = unit_to_string(r.unit);
    d["sub"] = r.counts.sub;
    d["del"] = r.counts.del;
    d["ins"] = r.counts.ins;
    d["ref_len"] = r.ref_len;
    d["rate"] = r.rate;
    return d;
  }, py::arg("ref"), py::arg("hyp"), py::arg("unit") = "wer", py::arg("lineup") = "compatibility");

  // --- synthetic corpus ---
  py::class_<SynthConfig>(m, "SynthConfig")
      .def(py::init<>())
      .def_readwrite("noise_sigma", &SynthConfig::noise_sigma)
      .def_readwrite("switch_prob", &SynthConfig::switch_prob)
      .def_readwrite("feature_dim", &SynthConfig::feature_dim)
      .def_readwrite("min_tokens", &SynthConfig::min_tokens)
      .def_readwrite("max_tokens", &SynthConfig::max_tokens)
      .def_readwrite("seed", &SynthConfig::seed);

  py::class_<Utterance>(m, "Utterance")
      .def(py::init([](py::array features, std::vector<int> targets) {
        Utterance u;
        u.features = tensor_from_array(features);
        u.targets = std::move(targets);
        u.lang_tags.assign(u.targets.size(), 0);
        return u;
      }))
      .def_property_readonly("features", [](const Utterance& u) { return array_from_tensor(u.features); })
      .def_readonly("targets", &Utterance::targets)
      .def_readonly("lang_tags", &Utterance::lang_tags);

  m.def("gen_corpus", [](const SynthConfig& cfg, const std::string& kind, int n, uint64_t seed) {
    return gen_corpus(cfg, corpus_kind_from_string(kind), n, seed);
  });
  m.def("save_corpus", &save_corpus);
  m.def("load_corpus", &load_corpus);

  // --- model ---
  py::class_<ModelConfig>(m, "ModelConfig")
      .def(py::init<>())
      .def_readwrite("d_model", &ModelConfig::d_model)
      .def_readwrite("n_layers", &ModelConfig::n_layers)
      .def_readwrite("n_heads", &ModelConfig::n_heads)
      .def_readwrite("feature_dim", &ModelConfig::feature_dim)
      .def_readwrite("ffn_dim", &ModelConfig::ffn_dim)
      .def_readwrite("vocab_size", &ModelConfig::vocab_size)
      .def_readwrite("max_frames", &ModelConfig::max_frames)
      .def_readwrite("seed", &ModelConfig::seed)
      .def_property("regime",
                    [](const ModelConfig& c) { return regime_to_string(c.regime); },
                    [](ModelConfig& c, const std::string& r) { c.regime = regime_from_string(r); })
      .def("fingerprint", &ModelConfig::fingerprint);

  py::class_<SeqModel>(m, "SeqModel")
      .def_static("init", &SeqModel::init)
      .def_property_readonly("config", &SeqModel::config)
      .def("count_params", &SeqModel::count_params, py::arg("trainable_only") = false)
      .def("attach_point_names", [](const SeqModel& model) {
        std::vector<std::string> names;
        for (const auto& pt : model.attach_points()) names.push_back(pt.name);
        return names;
      })
      .def("param", [](const SeqModel& model, const std::string& name) {
        return array_from_tensor(model.param(name));
      })
      .def("params_hash", &SeqModel::params_hash)
      .def("fingerprint", &SeqModel::fingerprint);

  m.def("default_attach_points", &default_attach_points);
  m.def("save_checkpoint", &save_checkpoint);
  m.def("load_checkpoint", &load_checkpoint);

  m.def("forward_loss", [](const SeqModel& model, py::array features, std::vector<int> targets,
                           const Adapter* adapter) {
    return forward_loss(model, tensor_from_array(features), targets, adapter).value();
  }, py::arg("model"), py::arg("features"), py::arg("targets"), py::arg("adapter") = nullptr);

  m.def("greedy_decode", [](const SeqModel& model, py::array features, const Adapter* adapter) {
    return greedy_decode(model, tensor_from_array(features), adapter);
  }, py::arg("model"), py::arg("features"), py::arg("adapter") = nullptr);

  // --- adapters ---
  py::class_<AdapterSpec>(m, "AdapterSpec")
      .def(py::init([](const std::string& kind, int rank, double scale,
                       std::vector<std::string> points, uint64_t seed) {
        AdapterSpec s;
        s.kind = adapter_kind_from_string(kind);
        s.rank = rank;
        s.scale = scale;
        s.attach_points = std::move(points);
        s.seed = seed;
        return s;
      }), py::arg("kind") = "lora", py::arg("rank") = 2, py::arg("scale") = 1.0,
          py::arg("attach_points") = std::vector<std::string>{}, py::arg("seed") = 0)
      .def_readwrite("rank", &AdapterSpec::rank)
      .def_readwrite("scale", &AdapterSpec::scale)
      .def_property_readonly("kind", [](const AdapterSpec& s) {
        return adapter_kind_to_string(s.kind);
      });

  py::class_<Adapter>(m, "Adapter")
      .def_property_readonly("spec", &Adapter::spec)
      .def("count_params", &Adapter::count_params)
      .def("param_names", [](const Adapter& a) {
        std::vector<std::string> names;
        for (const auto& [k, v] : a.params()) names.push_back(k);
        return names;
      })
      .def("param", [](const Adapter& a, const std::string& name) {
        return array_from_tensor(a.params().at(name));
      });

  m.def("attach", [](const SeqModel& model, const AdapterSpec& spec) {
    return attach(model, spec);
  });
  m.def("attach_bundle", [](const SeqModel& model, py::bytes data) {
    std::string s = data;
    return attach(model, deserialize_bundle(reinterpret_cast<const uint8_t*>(s.data()), s.size()));
  });
  m.def("merge_adapter", &merge_adapter);
  m.def("adapter_point_param_count", [](const std::string& kind, int rank, int d, int k) {
    return adapter_point_param_count(adapter_kind_from_string(kind), rank, d, k);
  });

  m.def("glu", [](py::array z, py::array wv, py::array bv, py::array wg, py::array bg) {
    GluParams p{tensor_from_array(wv), tensor_from_array(bv), tensor_from_array(wg),
                tensor_from_array(bg)};
    return array_from_tensor(glu(tensor_from_array(z), p));
  });
  m.def("lora_forward", [](py::array x, py::array w0, py::array a, py::array b, double s) {
    PointParams p;
    p.a = tensor_from_array(a);
    p.b = tensor_from_array(b);
    return array_from_tensor(lora_forward(tensor_from_array(x), tensor_from_array(w0), p, s));
  }, py::arg("x"), py::arg("w0"), py::arg("a"), py::arg("b"), py::arg("scale") = 1.0);
  m.def("glora_forward", [](const std::string& kind, py::array x, py::array w0, py::dict params,
                            double s) {
    AdapterKind k = adapter_kind_from_string(kind);
    return array_from_tensor(
        glora_forward(k, tensor_from_array(x), tensor_from_array(w0),
                      point_params_from_dict(k, params), s));
  }, py::arg("kind"), py::arg("x"), py::arg("w0"), py::arg("params"), py::arg("scale") = 1.0);
  m.def("merge_lora", [](py::array w0, py::array a, py::array b, double s) {
    return array_from_tensor(
        merge_lora(tensor_from_array(w0), tensor_from_array(a), tensor_from_array(b), s));
  }, py::arg("w0"), py::arg("a"), py::arg("b"), py::arg("scale") = 1.0);

  // --- training ---
  py::class_<TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_readwrite("lr", &TrainConfig::lr)
      .def_readwrite("batch_size", &TrainConfig::batch_size)
      .def_readwrite("steps", &TrainConfig::steps)
      .def_readwrite("clip_norm", &TrainConfig::clip_norm)
      .def_readwrite("seed", &TrainConfig::seed);

  py::class_<TrainReport>(m, "TrainReport")
      .def_readonly("final_loss", &TrainReport::final_loss)
      .def_readonly("trainable_params", &TrainReport::trainable_params)
      .def_readonly("wall_seconds", &TrainReport::wall_seconds)
      .def("to_text", &TrainReport::to_text);

  m.def("train_full", &train_full);
  m.def("train_adapter", &train_adapter);
  m.def("token_error_rate", &token_error_rate, py::arg("model"), py::arg("corpus"),
        py::arg("adapter") = nullptr);

  // --- bundles / serving ---
  m.def("bundle_bytes", [](const Adapter& adapter, uint64_t fingerprint) {
    auto bytes = serialize_bundle(bundle_from_adapter(adapter, fingerprint));
    return py::bytes(reinterpret_cast<const char*>(bytes.data()), bytes.size());
  });
  m.def("save_bundle_file", [](const Adapter& adapter, uint64_t fingerprint,
                               const std::string& path) {
    save_bundle(bundle_from_adapter(adapter, fingerprint), path);
  });
  m.def("bundle_info", [](py::bytes data) {
    std::string s = data;
    AdapterBundle b = deserialize_bundle(reinterpret_cast<const uint8_t*>(s.data()), s.size());
    py::dict d;
    d["kind"] = adapter_kind_to_string(b.kind);
    d["rank"] = b.rank;
    d["fingerprint"] = b.fingerprint;
    d["entries"] = static_cast<int>(b.entries.size());
    return d;
  });

  py::class_<Server>(m, "Server")
      .def(py::init([](const SeqModel& model, int max_train_steps) {
        ServerLimits limits;
        limits.max_train_steps = max_train_steps;
        return new Server(std::make_shared<SeqModel>(model), limits);
      }), py::arg("model"), py::arg("max_train_steps") = 1000)
      .def("start", &Server::start, py::call_guard<py::gil_scoped_release>())
      .def("stop", &Server::stop, py::call_guard<py::gil_scoped_release>())
      .def_property_readonly("port", &Server::port)
      .def("audit", [](const Server& s) {
        AuditReport r = s.audit();
        py::dict d;
        d["active_sessions"] = r.active_sessions;
        d["live_adapter_views"] = r.live_adapter_views;
        d["retained_request_bytes"] = r.retained_request_bytes;
        d["base_params_hash"] = r.base_params_hash;
        return d;
      });

  m.def("client_infer", [](const std::string& host, uint16_t port, const std::string& bundle_path,
                           py::array features) {
    Tensor f = tensor_from_array(features);
    InferOutcome out;
    {
      py::gil_scoped_release release;
      out = client_infer(host, port, bundle_path, f);
    }
    return py::make_tuple(out.tokens, out.text);
  });
  m.def("client_train", [](const std::string& host, uint16_t port, const std::string& bundle_path,
                           const std::vector<Utterance>& data, uint32_t steps, double lr,
                           uint64_t seed) {
    ClientTrainRequest req;
    req.steps = steps;
    req.lr = lr;
    req.seed = seed;
    py::gil_scoped_release release;
    return client_train(host, port, bundle_path, data, req);
  }, py::arg("host"), py::arg("port"), py::arg("bundle_path"), py::arg("data"),
     py::arg("steps") = 200, py::arg("lr") = 3e-3, py::arg("seed") = 0);
}
