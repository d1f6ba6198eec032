// Copyright 2026 The slu-cascade Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "slu/bpe.hpp"
#include "slu/cascade.hpp"
#include "slu/decoding.hpp"
#include "slu/error.hpp"
#include "slu/experiment.hpp"
#include "slu/losses.hpp"

namespace py = pybind11;
using namespace slu;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Tensor to_tensor(const Array& a) {
  if (a.ndim() != 2) throw ShapeError("expected a 2-D array");
  const auto r = static_cast<std::size_t>(a.shape(0)), c = static_cast<std::size_t>(a.shape(1));
  return Tensor({r, c}, std::vector<double>(a.data(), a.data() + a.size()));
}

Array to_array(const Tensor& t) {
  std::vector<py::ssize_t> shape(t.dims().begin(), t.dims().end());
  Array out(shape);
  std::copy(t.storage().begin(), t.storage().end(), out.mutable_data());
  return out;
}

}  // namespace

PYBIND11_MODULE(_slu, m) {
  m.doc() = "Cascaded streaming spoken-language-understanding models";

  // Every library error maps to one Python class carrying the code.
  static py::exception<Error> error(m, "SluError");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      error((std::string(e.code()) + ": " + e.what()).c_str());
    }
  });

  py::class_<BpeVocab>(m, "BpeVocab")
      .def_static("train", [](const std::vector<std::string>& corpus,
                              std::size_t size) { return BpeVocab::train(corpus, size); },
                  py::arg("corpus"), py::arg("target_size"))
      .def_static("load", &BpeVocab::load)
      .def("save", &BpeVocab::save)
      .def("encode", &BpeVocab::encode)
      .def("decode", [](const BpeVocab& v, const std::vector<TokenId>& ids) { return v.decode(ids); })
      .def("token", &BpeVocab::token)
      .def_property_readonly("tokens", &BpeVocab::tokens)
      .def("__len__", &BpeVocab::size);

  m.def("ctc_loss",
        [](const Array& log_probs, const std::vector<TokenId>& label) {
          return ctc_loss(to_tensor(log_probs), CtcLabelSequence{label, 0});
        },
        py::arg("log_probs"), py::arg("label"), "Negative log-likelihood; blank is id 0.");
  m.def("greedy_decode", [](const Array& lp) { return greedy_ctc_decode(to_tensor(lp)); });
  m.def("beam_nbest_decode",
        [](const Array& lp, std::size_t beam, std::size_t n) {
          std::vector<std::pair<WordpieceSequence, double>> out;
          for (auto& h : beam_nbest_decode(to_tensor(lp), beam, n))
            out.emplace_back(std::move(h.tokens), h.log_prob);
          return out;
        },
        py::arg("log_probs"), py::arg("beam") = 8, py::arg("n") = 4);
  m.def("edit_distance", [](const std::vector<std::string>& a, const std::vector<std::string>& b) {
    return edit_distance(a, b);
  });
  m.def("wer", [](const std::string& ref, const std::string& hyp) {
    return wer(split_words(ref), split_words(hyp));
  });

  py::class_<CascadeParams>(m, "Cascade")
      .def_static("load", &load_checkpoint)
      .def_static("init",
                  [](const std::string& dims_json, std::uint64_t seed) {
                    return CascadeParams::init(
                        nlohmann::json::parse(dims_json).get<CascadeDims>(), seed);
                  },
                  py::arg("dims_json") = "{}", py::arg("seed") = 1)
      .def("save", [](const CascadeParams& p, const std::filesystem::path& path) {
        save_checkpoint(p, path);
      })
      .def_property_readonly("dims_json",
                             [](const CascadeParams& p) { return nlohmann::json(p.dims).dump(); })
      .def("forward", [](const CascadeParams& p, const Array& feats) {
        const auto out = cascade_forward(p, to_tensor(feats));
        py::dict d;
        d["phone_logits"] = to_array(out.phoneme.logits);
        d["wp_log_probs"] = to_array(out.word.log_probs);
        d["intent_logits"] = to_array(out.intent_logits);
        return d;
      });

  // Owns its runtime so the session stays valid on the Python side.
  struct Stream {
    explicit Stream(const CascadeParams& p) : params(p), rt(params), session(rt) {}
    CascadeParams params;
    CascadeRuntime rt;
    StreamingSession session;
  };
  py::class_<Stream>(m, "Stream")
      .def(py::init<const CascadeParams&>())
      .def("push",
           [](Stream& s, const std::vector<double>& frame) {
             const StreamOutput o = s.session.push(frame);
             py::dict d;
             d["frame"] = o.frame;
             d["phone_logits"] = o.phone_logits;
             d["wp_log_probs"] = o.wp_log_probs ? py::cast(*o.wp_log_probs) : py::none();
             d["intent_logits"] = o.intent_logits;
             return d;
           })
      .def("reset", [](Stream& s) { s.session.reset(); });

  m.def("default_config_json", [] { return nlohmann::json(RunConfig::defaults()).dump(2); });
}
