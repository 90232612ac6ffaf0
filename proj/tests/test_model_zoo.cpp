#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include "terradeep/datasets.hpp"
#include "terradeep/error.hpp"
#include "terradeep/learner.hpp"
#include "terradeep/rng.hpp"
#include "terradeep/serialize.hpp"
#include "terradeep/training.hpp"
#include "terradeep/zoo.hpp"

using namespace terradeep;

namespace {

std::vector<std::size_t> filters(const NetworkSpec& spec) {
  std::vector<std::size_t> out;
  for (const LayerSpec& l : spec.layers)
    if (l.kind == LayerKind::conv1d || l.kind == LayerKind::conv2d) out.push_back(l.units);
  return out;
}

double dropout_rate(const NetworkSpec& spec) {
  for (const LayerSpec& l : spec.layers)
    if (l.kind == LayerKind::dropout) return l.rate;
  return 0.0;
}

Tensor random_batch(Shape sample, std::size_t n, SeededRng& rng) {
  sample.insert(sample.begin(), n);
  Tensor t(sample);
  for (double& v : t.values()) v = rng.normal();
  return t;
}

bool same_bits(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; }

std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "terradeep_zoo_test";
  std::filesystem::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST_CASE("zoo build examples") {
  const ZooEntry cnn = build("slip-cnn");
  CHECK(cnn.task == Task::slip);
  CHECK(filters(cnn.spec) == std::vector<std::size_t>{128, 64, 32});
  CHECK(dropout_rate(cnn.spec) == 0.1);
  CHECK(class_count(cnn.spec) == 3);
  CHECK_FALSE(cnn.supports(InputMode::filtered));

  const ZooEntry cnn1 = build("image-cnn1");
  CHECK(filters(cnn1.spec) == std::vector<std::size_t>{32, 32, 64, 64});
  CHECK(dropout_rate(cnn1.spec) == 0.25);
  CHECK(cnn1.spec.input_shape == Shape{1, 128, 128});
  CHECK(class_count(cnn1.spec) == 11);

  const ZooEntry cnn2 = build("image-cnn2");
  CHECK(dropout_rate(cnn2.spec) == 0.35);

  const ZooEntry dnn = build("image-dnn");
  CHECK(dnn.spec.input_shape == Shape{16384});
  CHECK(class_count(dnn.spec) == 11);
  CHECK(dnn.train.optimizer == Optimizer::adadelta);
  CHECK(dnn.train.batch_size == 100);
  CHECK(dnn.train.epochs == 35);

  const ZooEntry mlp = build("slip-mlp");
  CHECK(mlp.train.optimizer == Optimizer::sgd);
  CHECK(mlp.train.sgd_eta == 0.01);
  CHECK(mlp.supports(InputMode::filtered));

  const ZooEntry svm = build("slip-svm");
  CHECK(svm.learner == LearnerKind::svm);
  CHECK_THROWS_AS(instantiate(svm, {4}, 3), CatalogError);
}

TEST_CASE("catalog") {
  const auto items = list_catalog();
  REQUIRE(items.size() == 9);
  for (const auto& item : items) {
    CHECK(build(item.name).name == item.name);
    CHECK_FALSE(item.summary.empty());
  }
  CHECK(build("image-cnn1").summary.find("32 -> 32 -> 64 -> 64") != std::string::npos);
  CHECK(catalog_json().size() == 9);
  CHECK(to_json(build("slip-cnn"))["input_modes"] == nlohmann::json{"raw"});

  for (const char* bad : {"", "slip", "image-cnn3", "SLIP-SVM", "slip-svm "}) {
    CHECK_THROWS_AS(build(bad), CatalogError);
  }
  try {
    build("nope");
  } catch (const CatalogError& e) {
    CHECK(std::string(e.what()).find("image-cnn2") != std::string::npos);
    CHECK(e.kind() == ErrorKind::catalog);
  }
}

TEST_CASE("every network entry chains shapes and ends in a distribution") {
  SeededRng rng(11, Stream::init);
  for (const auto& name : zoo_names()) {
    const ZooEntry e = build(name);
    if (e.learner != LearnerKind::network) continue;
    CAPTURE(name);
    // Small stand-ins keep the check fast; the pinned shapes are validated by build().
    Shape input;
    if (name == "slip-cnn") input = {4, 20};
    else if (e.convolutional()) input = {1, 16, 16};
    else input = {12};
    const std::size_t classes = e.task == Task::slip ? 3 : 6;
    const NetworkSpec spec = instantiate(e, input, classes);
    CHECK(infer_shapes(spec).back() == Shape{classes});
    Network net(spec);
    net.initialize(rng);
    const Tensor probs = net.predict_proba(random_batch(input, 7, rng));
    REQUIRE(probs.shape() == Shape{7, classes});
    for (std::size_t i = 0; i < 7; ++i) {
      double sum = 0.0;
      for (double p : probs.slice0(i)) {
        CHECK(p >= 0.0);
        sum += p;
      }
      CHECK(std::fabs(sum - 1.0) <= 1e-9);
    }
  }
  // Too small for four 3x3 convolutions and a pool.
  CHECK_THROWS_AS(instantiate(build("image-cnn1"), {1, 4, 4}, 11), ShapeError);
}

TEST_CASE("spec json round trip") {
  for (const auto& name : zoo_names()) {
    const ZooEntry e = build(name);
    if (e.learner != LearnerKind::network) continue;
    CHECK(network_spec_from_json(to_json(e.spec)) == e.spec);
  }
  CHECK_THROWS_AS(network_spec_from_json(nlohmann::json{{"input_shape", {4}}}), FormatError);
  SvmConfig cfg;
  cfg.C = 3.5;
  cfg.tol = 1e-4;
  const SvmConfig back = svm_config_from_json(to_json(cfg));
  CHECK(back.C == 3.5);
  CHECK(back.tol == 1e-4);
}

TEST_CASE("model container encoding") {
  ModelFile f;
  f.section = std::string(kSectionNetwork);
  f.header = {{"k", "v"}};
  f.tensors.emplace_back(Shape{2, 3}, std::vector<double>{1, -2, 0.1, 1e-300, -0.0, 7});
  f.tensors.emplace_back(Shape{1}, std::vector<double>{std::nan("")});
  const std::string bytes = encode_model(f);
  CHECK(bytes.substr(0, 4) == "TDML");
  CHECK(bytes.substr(4, 4) == std::string("\x01\x00\x00\x00", 4));
  CHECK(bytes.substr(8, 4) == "NNET");

  const ModelFile back = decode_model(bytes);
  CHECK(back.section == "NNET");
  CHECK(back.header == f.header);
  REQUIRE(back.tensors.size() == 2);
  CHECK(back.tensors[0].shape() == Shape{2, 3});
  for (std::size_t i = 0; i < 6; ++i) CHECK(same_bits(back.tensors[0][i], f.tensors[0][i]));
  CHECK(same_bits(back.tensors[1][0], f.tensors[1][0]));
  CHECK(encode_model(back) == bytes);

  // Every truncation and a corrupted magic are rejected as format errors.
  for (std::size_t n = 0; n < bytes.size(); ++n) CHECK_THROWS_AS(decode_model(bytes.substr(0, n)), FormatError);
  std::string bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS_AS(decode_model(bad), FormatError);
  std::string trailing = bytes + "z";
  CHECK_THROWS_AS(decode_model(trailing), FormatError);
  CHECK_THROWS_AS(read_model_file(scratch("missing.tdml")), DatasetError);
}

TEST_CASE("network model round trip is bit exact") {
  SeededRng rng(12, Stream::init);
  const NetworkSpec spec = instantiate(build("image-mlp2"), {10}, 4);
  Network net(spec);
  net.initialize(rng);
  LearnerModel m;
  m.entry = "image-mlp2";
  m.task = Task::image;
  m.mode = InputMode::filtered;
  m.kind = LearnerKind::network;
  m.class_names = {"a", "b", "c", "d"};
  m.network.spec = spec;
  m.network.state = net.state();
  m.network.class_names = m.class_names;
  m.network.epoch_curve = {0.25, 0.5};
  m.standardizer = Standardizer::fit(random_batch({10}, 50, rng), 10);

  const auto path = scratch("mlp.tdml");
  save_learner(path, m);
  const LearnerModel back = load_learner(path);
  CHECK(back.entry == m.entry);
  CHECK(back.mode == InputMode::filtered);
  CHECK(back.class_names == m.class_names);
  CHECK(back.network.spec == spec);
  REQUIRE(back.network.state.params.size() == m.network.state.params.size());
  for (std::size_t t = 0; t < m.network.state.params.size(); ++t)
    CHECK(back.network.state.params[t] == m.network.state.params[t]);
  CHECK(back.standardizer.mean == m.standardizer.mean);
  CHECK(back.standardizer.scale == m.standardizer.scale);

  const Tensor inputs = random_batch({10}, 1000, rng);
  const Prediction a = predict(m.network, m.standardizer.apply(inputs));
  const Prediction b = predict(back.network, back.standardizer.apply(inputs));
  CHECK(a.labels == b.labels);
  for (std::size_t i = 0; i < a.probabilities.size(); ++i)
    CHECK(same_bits(a.probabilities[i], b.probabilities[i]));
  CHECK(encode_model(to_model_file(back)) == encode_model(to_model_file(m)));
}

TEST_CASE("fitted learners survive save and load") {
  const auto frames = synth_slip(150, 50, 3);
  DataSource source;
  source.frames = frames;
  SeededRng rng(13, Stream::data);
  for (const char* name : {"slip-svm", "slip-dnn"}) {
    CAPTURE(name);
    const ZooEntry e = build(name);
    const LabeledDataset ds = prepare_dataset(e, InputMode::filtered, source, {});
    LearnerOptions opt = default_options(e);
    opt.train.epochs = 3;
    LearnerModel m = fit_learner(e, InputMode::filtered, ds, opt);
    const auto path = scratch(std::string(name) + ".tdml");
    save_learner(path, m);
    const LearnerModel back = load_learner(path);
    CHECK(back.kind == e.learner);
    Tensor probe({1000, 4});
    for (double& v : probe.values()) v = rng.uniform(0.0, 10.0);
    CHECK(predict_learner(back, probe) == predict_learner(m, probe));
    CHECK(predict_learner(back, ds.features) == predict_learner(m, ds.features));
  }
}

TEST_CASE("mismatched section tag is rejected") {
  const auto frames = synth_slip(60, 50, 4);
  DataSource source;
  source.frames = frames;
  const ZooEntry e = build("slip-svm");
  const LearnerModel m = fit_learner(e, InputMode::raw, prepare_dataset(e, InputMode::raw, source, {}),
                                     default_options(e));
  ModelFile f = to_model_file(m);
  CHECK(f.section == "SVMC");
  f.section = std::string(kSectionNetwork);
  CHECK_THROWS_AS(from_model_file(f), FormatError);
  f = to_model_file(m);
  f.header["entry"] = "image-cnn9";
  CHECK_THROWS_AS(from_model_file(f), FormatError);
}

TEST_CASE("dataset preparation per entry and mode") {
  DataSource slip;
  slip.frames = synth_slip(60, 50, 5);
  CHECK(prepare_dataset(build("slip-mlp"), InputMode::raw, slip, {}).features.shape() == Shape{180, 4});
  PrepareOptions opt;
  opt.window = 16;
  opt.window_stride = 4;
  const LabeledDataset w = prepare_dataset(build("slip-cnn"), InputMode::raw, slip, opt);
  CHECK(w.sample_shape() == Shape{4, 16});
  CHECK_THROWS_AS(prepare_dataset(build("slip-cnn"), InputMode::filtered, slip, opt), ParameterError);
  CHECK_THROWS_AS(prepare_dataset(build("image-dnn"), InputMode::raw, slip, opt), ParameterError);

  DataSource images;
  images.task = Task::image;
  images.images = synth_terrain({"flat", "rocks"}, 3, 64, 1);
  CHECK(prepare_dataset(build("image-cnn2"), InputMode::raw, images, {}).sample_shape() == Shape{1, 64, 64});
  CHECK(prepare_dataset(build("image-dnn"), InputMode::raw, images, {}).sample_shape() == Shape{4096});
  CHECK(prepare_dataset(build("image-mlp1"), InputMode::filtered, images, {}).sample_shape() ==
        Shape{hog_length(64, 64, {})});

  const PrepareOptions back = PrepareOptions::from_json(opt.to_json());
  CHECK(back.window == 16);
  CHECK(back.nw == opt.nw);
}

TEST_CASE("standardizer") {
  SeededRng rng(14, Stream::data);
  Tensor x({200, 3, 5});
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = rng.normal(static_cast<double>(i % 15 / 5) * 10.0, 3.0);
  const Standardizer s = Standardizer::fit(x, 3);
  CHECK(s.group_length == 5);
  const Tensor y = s.apply(x);
  for (std::size_t g = 0; g < 3; ++g) {
    double sum = 0.0, sq = 0.0;
    for (std::size_t i = 0; i < 200; ++i)
      for (std::size_t k = 0; k < 5; ++k) {
        const double v = y[i * 15 + g * 5 + k];
        sum += v;
        sq += v * v;
      }
    CHECK(std::fabs(sum / 1000.0) <= 1e-12);
    CHECK(sq / 1000.0 == doctest::Approx(1.0).epsilon(1e-12));
  }
  // Constant groups pass through centred, not divided by zero.
  const Standardizer c = Standardizer::fit(Tensor({4, 2}, 5.0), 2);
  const Tensor centred = c.apply(Tensor({4, 2}, 5.0));
  for (double v : centred.values()) CHECK(v == 0.0);
  CHECK_THROWS_AS(Standardizer::fit(x, 4), ShapeError);
  CHECK_THROWS_AS(s.apply(Tensor({3, 4})), ShapeError);
  CHECK(Standardizer{}.apply(x) == x);
}

TEST_CASE("fitted learners standardize on the training side") {
  DataSource images;
  images.task = Task::image;
  images.images = synth_terrain({"flat", "rocks"}, 3, 64, 2);
  const ZooEntry cnn = build("image-cnn1");
  LearnerOptions options = default_options(cnn);
  options.train.epochs = 1;
  const LabeledDataset raw = prepare_dataset(cnn, InputMode::raw, images, {});
  const LearnerModel m = fit_learner(cnn, InputMode::raw, raw, options);
  // One mean and scale for the single pixel channel.
  REQUIRE(m.standardizer.mean.size() == 1);
  CHECK(m.standardizer.group_length == 64u * 64u);
  double sum = 0.0;
  for (double v : raw.features.values()) sum += v;
  CHECK(m.standardizer.mean[0] == doctest::Approx(sum / static_cast<double>(raw.features.size())).epsilon(1e-12));

  const ZooEntry dnn = build("image-dnn");
  const LabeledDataset flat = prepare_dataset(dnn, InputMode::raw, images, {});
  options = default_options(dnn);
  options.train.epochs = 1;
  CHECK(fit_learner(dnn, InputMode::raw, flat, options).standardizer.mean.size() == 1);
  const LabeledDataset hog = prepare_dataset(dnn, InputMode::filtered, images, {});
  CHECK(fit_learner(dnn, InputMode::filtered, hog, options).standardizer.mean.size() == hog.features.dim(1));
}
