// python/bindings.cpp
#include <pybind11/numpy.h>
#include <pybind11/operators.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "diarkit/bandwidth.hpp"
#include "diarkit/cluster.hpp"
#include "diarkit/dsp.hpp"
#include "diarkit/error.hpp"
#include "diarkit/eval.hpp"
#include "diarkit/pipeline.hpp"
#include "diarkit/segmenter.hpp"
#include "diarkit/synth.hpp"
#include "diarkit/tsvad.hpp"
#include "diarkit/vad.hpp"

namespace py = pybind11;
using namespace diarkit;

namespace {

AudioBuffer audio_from_array(py::array_t<float, py::array::c_style | py::array::forcecast> samples, int sample_rate) {
  if (samples.ndim() != 1) throw ShapeError("samples must be one-dimensional");
  AudioBuffer a;
  a.sample_rate = sample_rate;
  a.samples.assign(samples.data(), samples.data() + samples.size());
  return a;
}

py::array_t<double> features_to_array(const FeatureMatrix& f) {
  py::array_t<double> out({f.frames, f.bins});
  std::copy(f.data.begin(), f.data.end(), out.mutable_data());
  return out;
}

py::array_t<double> matrix_to_array(const SimilarityMatrix& s) {
  py::array_t<double> out({s.n, s.n});
  std::copy(s.values.begin(), s.values.end(), out.mutable_data());
  return out;
}

SimilarityMatrix matrix_from_array(py::array_t<double, py::array::c_style | py::array::forcecast> a) {
  if (a.ndim() != 2 || a.shape(0) != a.shape(1)) throw ShapeError("expected a square matrix");
  SimilarityMatrix s(static_cast<std::size_t>(a.shape(0)));
  std::copy(a.data(), a.data() + a.size(), s.values.begin());
  return s;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Speaker diarization toolkit: front end, clustering, TSVAD, scoring and synthetic data";
  m.attr("__version__") = "0.1.0";

  // Errors
  auto error = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", error.ptr());
  py::register_exception<ParseError>(m, "ParseError", error.ptr());
  py::register_exception<InputError>(m, "InputError", error.ptr());
  py::register_exception<ParameterError>(m, "ParameterError", error.ptr());
  py::register_exception<PreconditionError>(m, "PreconditionError", error.ptr());
  py::register_exception<NormalizationError>(m, "NormalizationError", error.ptr());
  py::register_exception<InsufficientSpeakersError>(m, "InsufficientSpeakersError", error.ptr());

  // Value types
  py::class_<Segment>(m, "Segment")
      .def(py::init<>())
      .def(py::init([](double s, double e) { return Segment{s, e}; }), py::arg("start"), py::arg("end"))
      .def_readwrite("start", &Segment::start)
      .def_readwrite("end", &Segment::end)
      .def("duration", &Segment::duration)
      .def(py::self == py::self)
      .def("__repr__", [](const Segment& s) {
        return "Segment(" + std::to_string(s.start) + ", " + std::to_string(s.end) + ")";
      });

  py::class_<Turn>(m, "Turn")
      .def(py::init([](Segment s, std::string spk) { return Turn{s, std::move(spk)}; }), py::arg("segment"),
           py::arg("speaker"))
      .def_readwrite("segment", &Turn::segment)
      .def_readwrite("speaker", &Turn::speaker);

  py::class_<Diarization>(m, "Diarization")
      .def(py::init<>())
      .def(py::init([](std::string id, std::vector<Turn> turns) { return Diarization{std::move(id), std::move(turns)}; }),
           py::arg("recording_id"), py::arg("turns"))
      .def_readwrite("recording_id", &Diarization::recording_id)
      .def_readwrite("turns", &Diarization::turns)
      .def("speakers", &Diarization::speakers)
      .def("speaker_time", &Diarization::speaker_time)
      .def("normalized", &Diarization::normalized);

  py::class_<EmbeddedSegment>(m, "EmbeddedSegment")
      .def(py::init([](Segment s, Embedding e) { return EmbeddedSegment{s, std::move(e)}; }), py::arg("segment"),
           py::arg("embedding"))
      .def_readwrite("segment", &EmbeddedSegment::segment)
      .def_readwrite("embedding", &EmbeddedSegment::embedding);

  // Audio front end
  py::class_<AudioBuffer>(m, "AudioBuffer")
      .def(py::init(&audio_from_array), py::arg("samples"), py::arg("sample_rate"))
      .def_readonly("sample_rate", &AudioBuffer::sample_rate)
      .def_property_readonly("samples",
                             [](const AudioBuffer& a) {
                               py::array_t<float> out(a.samples.size());
                               std::copy(a.samples.begin(), a.samples.end(), out.mutable_data());
                               return out;
                             })
      .def("duration", &AudioBuffer::duration)
      .def("slice", &AudioBuffer::slice, py::arg("start_s"), py::arg("end_s"));

  m.def("read_wav", &read_wav, py::arg("path"));
  m.def("write_wav", &write_wav, py::arg("path"), py::arg("audio"));
  m.def("resample_to_8k", &resample_to_8k, py::arg("audio"));
  m.def("log_mel", [](const AudioBuffer& a, int n_mels) { return features_to_array(log_mel(a, n_mels)); },
        py::arg("audio"), py::arg("n_mels") = 80);

  py::enum_<Bandwidth>(m, "Bandwidth").value("CTS", Bandwidth::kCts).value("NCTS", Bandwidth::kNcts);
  py::class_<BandwidthClass>(m, "BandwidthClass")
      .def_readonly("value", &BandwidthClass::value)
      .def_readonly("peak_above_4k", &BandwidthClass::peak_above_4k);
  m.def("classify_bandwidth", &classify_bandwidth, py::arg("audio"), py::arg("threshold") = kBandwidthThreshold,
        py::arg("horizon_s") = kBandwidthHorizonSeconds);

  // Speech regions and segmentation
  m.def("binarize",
        [](std::vector<double> probs, double threshold, double min_dur_s, double min_gap_s) {
          return binarize(SpeechMask{std::move(probs), kFrameShift}, {threshold, min_dur_s, min_gap_s});
        },
        py::arg("probs"), py::arg("threshold") = 0.5, py::arg("min_dur_s") = 0.1, py::arg("min_gap_s") = 0.1);
  m.def("uniform_segments", py::overload_cast<const std::vector<Segment>&, double, double>(&uniform_segments),
        py::arg("speech"), py::arg("window_s"), py::arg("shift_s"));
  m.def(
      "recursive_merge",
      [](std::vector<EmbeddedSegment> segs, double threshold, const std::string& mean) {
        if (mean != "pair" && mean != "members") throw ParameterError("mean must be 'pair' or 'members'");
        return recursive_merge(std::move(segs), threshold, mean == "members" ? MergeMean::kMembers : MergeMean::kPair);
      },
      py::arg("segments"), py::arg("threshold") = kMergeThreshold, py::arg("mean") = "pair");

  // Clustering
  m.def("cosine_similarity",
        [](const Embedding& a, const Embedding& b) { return cosine_similarity(a, b); }, py::arg("a"), py::arg("b"));
  py::class_<Clustering>(m, "Clustering")
      .def_readonly("labels", &Clustering::labels)
      .def_readonly("centers", &Clustering::centers)
      .def("num_clusters", &Clustering::num_clusters);
  m.def("ahc", py::overload_cast<const std::vector<Embedding>&, double>(&ahc), py::arg("embeddings"),
        py::arg("stop_threshold") = kAhcStopThreshold);
  m.def("cosine_affinity",
        [](const std::vector<Embedding>& xs, const std::string& mode) {
          return matrix_to_array(cosine_affinity(xs, mode == "shift" ? AffinityMapping::kShift : AffinityMapping::kClip));
        },
        py::arg("embeddings"), py::arg("mapping") = "clip");
  m.def("spectral_cluster",
        [](py::array_t<double, py::array::c_style | py::array::forcecast> s, std::optional<std::size_t> k,
           std::size_t max_speakers, std::uint64_t seed) {
          SpectralOptions o;
          o.k = k;
          o.max_speakers = max_speakers;
          o.seed = seed;
          const auto r = spectral_cluster(matrix_from_array(s), o);
          return py::make_tuple(r.clustering.labels, r.k, r.eigenvalues);
        },
        py::arg("affinity"), py::arg("k") = py::none(), py::arg("max_speakers") = 8, py::arg("seed") = 0,
        "Returns (labels, k, ascending Laplacian eigenvalues).");

  // TSVAD post-processing
  m.def("median_filter", [](const std::vector<double>& x, std::size_t taps) { return median_filter(x, taps); },
        py::arg("x"), py::arg("taps") = kMedianTaps);
  m.def("postprocess",
        [](const std::vector<std::vector<double>>& probs, const std::vector<std::string>& speakers,
           const std::vector<Segment>& speech, double threshold, std::size_t taps) {
          SpeakerTracks t;
          t.probs = probs;
          t.speakers = speakers;
          return postprocess(t, speech, {threshold, taps});
        },
        py::arg("probs"), py::arg("speakers"), py::arg("speech"), py::arg("threshold") = kTsvadThreshold,
        py::arg("median_taps") = kMedianTaps);

  // Scoring
  py::class_<RttmTurn>(m, "RttmTurn")
      .def(py::init([](std::string f, double on, double dur, std::string spk) {
             return RttmTurn{std::move(f), on, dur, std::move(spk)};
           }),
           py::arg("file_id"), py::arg("onset"), py::arg("duration"), py::arg("speaker"))
      .def_readwrite("file_id", &RttmTurn::file_id)
      .def_readwrite("onset", &RttmTurn::onset)
      .def_readwrite("duration", &RttmTurn::duration)
      .def_readwrite("speaker", &RttmTurn::speaker)
      .def(py::self == py::self);
  m.def("parse_rttm", [](const std::string& text) { return parse_rttm(text); }, py::arg("text"));
  m.def("emit_rttm", &emit_rttm, py::arg("turns"));
  m.def("to_rttm", &to_rttm, py::arg("diarization"));
  m.def("rttm_to_diarizations", &rttm_to_diarizations, py::arg("turns"));

  py::class_<DerReport>(m, "DerReport")
      .def_readonly("der", &DerReport::der)
      .def_readonly("miss", &DerReport::miss)
      .def_readonly("false_alarm", &DerReport::false_alarm)
      .def_readonly("confusion", &DerReport::confusion)
      .def_readonly("total_ref_s", &DerReport::total_ref_s)
      .def_readonly("mapping", &DerReport::mapping);
  m.def("compute_der",
        [](const Diarization& ref, const Diarization& hyp, double collar_s, bool score_overlap,
           std::optional<std::vector<Segment>> uem) {
          DerOptions o;
          o.collar_s = collar_s;
          o.score_overlap = score_overlap;
          o.uem = std::move(uem);
          return compute_der(ref, hyp, o);
        },
        py::arg("ref"), py::arg("hyp"), py::arg("collar_s") = 0.0, py::arg("score_overlap") = true,
        py::arg("uem") = py::none());
  m.def("vad_frame_accuracy", &vad_frame_accuracy, py::arg("ref"), py::arg("hyp"));

  // Synthetic data
  py::class_<SynthSpec>(m, "SynthSpec")
      .def(py::init<>())
      .def_readwrite("n_speakers", &SynthSpec::n_speakers)
      .def_readwrite("duration_s", &SynthSpec::duration_s)
      .def_readwrite("overlap_fraction", &SynthSpec::overlap_fraction)
      .def_readwrite("turn_min_s", &SynthSpec::turn_min_s)
      .def_readwrite("turn_max_s", &SynthSpec::turn_max_s)
      .def_readwrite("max_gap_s", &SynthSpec::max_gap_s)
      .def_readwrite("noise_sigma", &SynthSpec::noise_sigma)
      .def_readwrite("seed", &SynthSpec::seed)
      .def_readwrite("sample_rate", &SynthSpec::sample_rate);
  m.def("gen_audio_conversation",
        [](const SynthSpec& spec, const std::string& id) {
          auto c = gen_audio_conversation(spec, id);
          return py::make_tuple(c.audio, c.reference);
        },
        py::arg("spec"), py::arg("recording_id") = "synth", "Returns (AudioBuffer, reference Diarization).");
  m.def("gen_embedding_stream",
        [](const SynthSpec& spec) {
          auto s = gen_embedding_stream(spec);
          return py::make_tuple(s.segments, s.speakers, s.reference);
        },
        py::arg("spec"), "Returns (segments, true speaker indices, reference Diarization).");

  // Pipeline
  py::class_<PipelineConfig>(m, "PipelineConfig")
      .def(py::init<>())
      .def_static("parse", &PipelineConfig::parse, py::arg("text"))
      .def_static("keys", &PipelineConfig::keys)
      .def("set", &PipelineConfig::set, py::arg("key"), py::arg("value"))
      .def("to_text", &PipelineConfig::to_text)
      .def("validate", &PipelineConfig::validate);

  m.def("diarize",
        [](const AudioBuffer& audio, const std::string& recording_id, std::optional<std::vector<Segment>> speech,
           const PipelineConfig& cfg, bool stub_embeddings, bool stub_vad) {
          RunOptions opts;
          opts.stub_embeddings = stub_embeddings;
          opts.stub_vad = stub_vad;
          py::gil_scoped_release release;
          const auto models = load_models(cfg, opts, !speech.has_value());
          auto res = diarize_recording(audio, recording_id, speech, models, cfg);
          return std::make_pair(res.diarization, res.report.dump());
        },
        py::arg("audio"), py::arg("recording_id"), py::arg("speech") = py::none(), py::arg("config") = PipelineConfig{},
        py::arg("stub_embeddings") = false, py::arg("stub_vad") = false,
        "Diarizes one recording. Returns (Diarization, JSON report string).");
}
