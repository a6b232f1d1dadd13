#include <gtest/gtest.h>

#include <json.hpp>

#include "authorgan/error.hpp"
#include "authorgan/harness.hpp"
#include "authorgan/spec.hpp"

using namespace authorgan;
using nlohmann::json;

namespace {

const char* kPaperConfig = R"({
    "GAN_model":{
        "epochs":"50"
    },
    "generator":{
        "choice":"dcgan"
    },
    "discriminator":{
        "choice":"dcgan"
    },
    "data_path":"dataset/mnistData.pkl"
})";

const Shape kMnist{1, 28, 28};

bool has_error_at(const std::vector<Diagnostic>& d, const std::string& path) {
  for (const auto& x : d)
    if (x.is_error() && x.path == path) return true;
  return false;
}

GanSpec parsed(const std::string& text) {
  ParseResult r = parse_spec(text);
  EXPECT_TRUE(r.ok()) << diagnostics_json(r.diagnostics);
  return r.ok() ? *r.spec : GanSpec{};
}

std::string pair_spec(const std::string& g, const std::string& d) {
  return R"({"generator":{"choice":")" + g + R"("},"discriminator":{"choice":")" + d +
         R"("},"data_path":"mnist.idx"})";
}

}  // namespace

TEST(Parse, PaperConfig) {
  const GanSpec s = parsed(kPaperConfig);
  EXPECT_EQ(s.gan_model.epochs, 50);
  EXPECT_EQ(s.generator.choice, "dcgan");
  EXPECT_EQ(s.discriminator.choice, "dcgan");
  EXPECT_EQ(s.data_path, "dataset/mnistData.pkl");
  EXPECT_EQ(s.gan_model.batch_size, 64);
  EXPECT_EQ(s.gan_model.seed, 0u);
  EXPECT_EQ(s.gan_model.latent_dim, 100);
  EXPECT_EQ(s.spec_version, "1");
  EXPECT_TRUE(validate(s).empty());
}

TEST(Parse, EmptyObjectHasThreeErrors) {
  const auto d = check_spec("{}");
  ASSERT_EQ(error_count(d), 3u);
  EXPECT_TRUE(has_error_at(d, "/generator"));
  EXPECT_TRUE(has_error_at(d, "/discriminator"));
  EXPECT_TRUE(has_error_at(d, "/data_path"));
}

TEST(Parse, ChoiceAndLayersAreExclusive) {
  const auto d = check_spec(R"({"generator":{"choice":"gan","layers":["Tanh"]},
    "discriminator":{"choice":"gan"},"data_path":"a.idx"})");
  EXPECT_TRUE(has_error_at(d, "/generator"));
}

TEST(Parse, MalformedJsonIsOneDiagnosticWithPosition) {
  const auto d = check_spec("{\n  \"generator\": {\n    \"choice\": \"gan\",\n  }\n}");
  ASSERT_EQ(d.size(), 1u);
  EXPECT_TRUE(d[0].is_error());
  ASSERT_TRUE(d[0].line.has_value());
  ASSERT_TRUE(d[0].column.has_value());
  EXPECT_EQ(*d[0].line, 4u);
}

TEST(Parse, UnknownKeysRejected) {
  const auto d = check_spec(R"({"generator":{"choice":"gan"},"discriminator":{"choice":"gan"},
    "data_path":"a.idx","colour":"blue"})");
  EXPECT_TRUE(has_error_at(d, "/colour"));
  const auto d2 = check_spec(R"({"generator":{"choice":"gan","depth":3},
    "discriminator":{"choice":"gan"},"data_path":"a.idx"})");
  EXPECT_TRUE(has_error_at(d2, "/generator/depth"));
}

TEST(Parse, NumericStringsAccepted) {
  const GanSpec s = parsed(R"({"GAN_model":{"epochs":"3","batch_size":"16","seed":"7",
    "learning_rate":"0.001"},"generator":{"choice":"gan"},"discriminator":{"choice":"gan"},
    "data_path":"a.idx"})");
  EXPECT_EQ(s.gan_model.epochs, 3);
  EXPECT_EQ(s.gan_model.batch_size, 16);
  EXPECT_EQ(s.gan_model.seed, 7u);
  EXPECT_DOUBLE_EQ(*s.gan_model.learning_rate, 0.001);
}

TEST(Parse, LayerParamsFromStrings) {
  const GanSpec s = parsed(R"({"generator":{"layers":[{"kind":"Dense","params":{"units":"784"}},
    "Tanh",{"kind":"Reshape","params":{"shape":[1,28,28]}}]},
    "discriminator":{"choice":"gan"},"data_path":"a.idx"})");
  ASSERT_TRUE(s.generator.layers);
  EXPECT_EQ(get_int((*s.generator.layers)[0], "units"), 784);
  EXPECT_TRUE(validate(s).empty());
}

TEST(Validate, UnknownPresetListsNames) {
  const auto d = check_spec(pair_spec("notagan", "gan"));
  ASSERT_TRUE(has_error_at(d, "/generator/choice"));
  for (const auto& x : d) {
    if (x.path == "/generator/choice") {
      for (const char* n : {"gan", "cgan", "dcgan", "wgan", "wgan_gp"})
        EXPECT_NE(x.message.find(n), std::string::npos) << x.message;
    }
  }
}

TEST(Validate, NCriticZeroIsRangeError) {
  const auto d = check_spec(R"({"generator":{"choice":"wgan"},"discriminator":{"choice":"wgan"},
    "train_process":{"choice":"wgan_clip","params":{"n_critic":0}},"data_path":"a.idx"})");
  EXPECT_TRUE(has_error_at(d, "/train_process/params/n_critic"));
}

TEST(Validate, ProcessParamRanges) {
  const auto d = check_spec(R"({"generator":{"choice":"wgan"},"discriminator":{"choice":"wgan"},
    "train_process":{"choice":"wgan_gp","params":{"clip_value":-1,"gp_lambda":-2}},
    "data_path":"a.idx"})");
  EXPECT_TRUE(has_error_at(d, "/train_process/params/clip_value"));
  EXPECT_TRUE(has_error_at(d, "/train_process/params/gp_lambda"));
}

TEST(Validate, SettingsRanges) {
  const auto d = check_spec(R"({"GAN_model":{"epochs":0,"batch_size":0},
    "generator":{"choice":"gan"},"discriminator":{"choice":"gan"},"data_path":"a.idx"})");
  EXPECT_TRUE(has_error_at(d, "/GAN_model/epochs"));
  EXPECT_TRUE(has_error_at(d, "/GAN_model/batch_size"));
}

TEST(Validate, LayerSchemaViolationsNameTheKey) {
  const auto d = check_spec(R"({"generator":{"layers":[{"kind":"Dense","params":{"units":-1}}]},
    "discriminator":{"choice":"gan"},"data_path":"a.idx"})");
  EXPECT_TRUE(has_error_at(d, "/generator/layers/0/params/units"));
}

TEST(Validate, DataPathExtension) {
  const auto d = check_spec(R"({"generator":{"choice":"gan"},"discriminator":{"choice":"gan"},
    "data_path":"photos.jpeg"})");
  EXPECT_TRUE(has_error_at(d, "/data_path"));
  EXPECT_EQ(error_count(check_spec(pair_spec("gan", "gan"))), 0u);
}

TEST(Validate, WrongCategoryForLossAndOptimizer) {
  const auto d = check_spec(R"({"generator":{"choice":"gan","loss":"Adam","optimizer":"BCE"},
    "discriminator":{"choice":"gan"},"data_path":"a.idx"})");
  EXPECT_TRUE(has_error_at(d, "/generator/loss/kind"));
  EXPECT_TRUE(has_error_at(d, "/generator/optimizer/kind"));
}

TEST(Validate, RecurrentIsWarningThenResolveError) {
  const GanSpec s = parsed(R"({"generator":{"layers":[{"kind":"Reshape","params":{"shape":[10,10]}},
    {"kind":"LSTM","params":{"units":784}},{"kind":"Reshape","params":{"shape":[1,28,28]}}]},
    "discriminator":{"choice":"gan"},"data_path":"a.idx"})");
  const auto d = validate(s);
  EXPECT_EQ(error_count(d), 0u);
  EXPECT_EQ(d.size(), 1u);
  try {
    resolve(s, kMnist);
    FAIL();
  } catch (const ResolveError& e) {
    EXPECT_TRUE(has_error_at(e.diagnostics(), "/generator/layers/1/kind"));
  }
}

TEST(RoundTrip, ParseSerializeParse) {
  for (const std::string& text :
       {std::string(kPaperConfig),
        std::string(R"({"GAN_model":{"epochs":2,"batch_size":32,"seed":9,"latent_dim":16,
          "learning_rate":0.0005},"generator":{"layers":[{"kind":"Dense","params":{"units":8}},
          {"kind":"LeakyReLU","params":{"alpha":0.1}},"Tanh"],"optimizer":{"kind":"SGD",
          "params":{"lr":0.1}},"loss":"MSE"},"discriminator":{"choice":"wgan"},
          "train_process":{"choice":"wgan_clip","params":{"n_critic":2,"clip_value":0.05}},
          "data_path":"d.gfd","labels_path":"l.idx"})")}) {
    const GanSpec a = parsed(text);
    const GanSpec b = parsed(serialize_spec(a));
    EXPECT_EQ(a, b);
    EXPECT_EQ(serialize_spec(a), serialize_spec(b));
  }
}

TEST(Resolve, PaperConfigOnMnist) {
  const ResolvedModel m = resolve(parsed(kPaperConfig), kMnist);
  EXPECT_EQ(m.generator_name, "dcgan");
  EXPECT_EQ(m.discriminator_name, "dcgan");
  EXPECT_EQ(m.generator.output_shape(), kMnist);
  EXPECT_EQ(m.discriminator.output_shape(), Shape{1});
  EXPECT_EQ(m.generator_loss, LossKind::bce);
  EXPECT_EQ(m.discriminator_loss, LossKind::bce);
  EXPECT_EQ(m.generator_optimizer.config.kind, OptimizerKind::adam);
  EXPECT_EQ(m.discriminator_optimizer.config.kind, OptimizerKind::adam);
  EXPECT_EQ(m.process.kind, ProcessKind::standard);
  EXPECT_EQ(m.latent_dim, 100u);
  bool has_conv = false;
  for (const auto& l : m.discriminator.layers()) has_conv |= l.spec().kind == "Conv2D";
  EXPECT_TRUE(has_conv);
}

TEST(Resolve, DiscriminatorFamilyGoverns) {
  const ResolvedModel m = resolve(parsed(pair_spec("dcgan", "wgan")), kMnist);
  EXPECT_EQ(m.generator_loss, LossKind::wasserstein);
  EXPECT_EQ(m.discriminator_loss, LossKind::wasserstein);
  EXPECT_EQ(m.discriminator_optimizer.config.kind, OptimizerKind::rmsprop);
  EXPECT_EQ(m.process.kind, ProcessKind::wgan_clip);
  EXPECT_FALSE(m.pairing.empty());

  const ResolvedModel gp = resolve(parsed(pair_spec("gan", "wgan_gp")), kMnist);
  EXPECT_EQ(gp.process.kind, ProcessKind::wgan_gp);
  const ResolvedModel std_ = resolve(parsed(pair_spec("wgan", "dcgan")), kMnist);
  EXPECT_EQ(std_.process.kind, ProcessKind::standard);
  EXPECT_EQ(std_.discriminator_loss, LossKind::bce);
}

TEST(Resolve, ExplicitFieldsOverride) {
  const ResolvedModel m = resolve(parsed(R"({"generator":{"choice":"gan","optimizer":"SGD"},
    "discriminator":{"choice":"wgan","loss":"MSE"},
    "train_process":{"choice":"standard"},"data_path":"a.idx"})"), kMnist);
  EXPECT_EQ(m.generator_optimizer.config.kind, OptimizerKind::sgd);
  EXPECT_EQ(m.discriminator_optimizer.config.kind, OptimizerKind::rmsprop);
  EXPECT_EQ(m.discriminator_loss, LossKind::mse);
  EXPECT_EQ(m.process.kind, ProcessKind::standard);
}

TEST(Resolve, LearningRateSetting) {
  const ResolvedModel m = resolve(parsed(R"({"GAN_model":{"learning_rate":0.003},
    "generator":{"choice":"gan","optimizer":{"kind":"Adam","params":{"lr":0.1}}},
    "discriminator":{"choice":"gan"},"data_path":"a.idx"})"), kMnist);
  EXPECT_DOUBLE_EQ(m.generator_optimizer.config.lr, 0.1);
  EXPECT_DOUBLE_EQ(m.discriminator_optimizer.config.lr, 0.003);
}

TEST(Resolve, OutputShapeMismatchPointsAtLastLayer) {
  const GanSpec s = parsed(R"({"generator":{"layers":[{"kind":"Dense","params":{"units":10}}]},
    "discriminator":{"choice":"gan"},"data_path":"a.idx"})");
  try {
    resolve(s, kMnist);
    FAIL();
  } catch (const ResolveError& e) {
    EXPECT_TRUE(has_error_at(e.diagnostics(), "/generator/layers/0")) << e.what();
  }
}

TEST(Resolve, ShapeFailureNamesFirstInconsistentLayer) {
  const GanSpec s = parsed(R"({"generator":{"choice":"gan"},"discriminator":{"layers":[
    {"kind":"Dense","params":{"units":10}},{"kind":"Dense","params":{"units":1}}]},
    "data_path":"a.idx"})");
  try {
    resolve(s, kMnist);
    FAIL();
  } catch (const ResolveError& e) {
    EXPECT_TRUE(has_error_at(e.diagnostics(), "/discriminator/layers/0")) << e.what();
  }
}

TEST(Resolve, AllSixteenMatrixPairs) {
  for (const auto& g : matrix_generators())
    for (const auto& d : matrix_discriminators()) {
      const ResolvedModel m = resolve(parsed(pair_spec(g, d)), kMnist);
      EXPECT_EQ(m.generator.output_shape(), kMnist) << g << "," << d;
      EXPECT_EQ(m.discriminator.output_shape(), Shape{1}) << g << "," << d;
    }
}

TEST(Resolve, DeterministicInitialization) {
  const GanSpec s = parsed(pair_spec("gan", "wgan"));
  const ResolvedModel a = resolve(s, kMnist), b = resolve(s, kMnist);
  const auto pa = a.generator.parameters(), pb = b.generator.parameters();
  ASSERT_EQ(pa.size(), pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) EXPECT_EQ(pa[i].value(), pb[i].value());
  const auto da = a.discriminator.parameters(), db = b.discriminator.parameters();
  for (std::size_t i = 0; i < da.size(); ++i) EXPECT_EQ(da[i].value(), db[i].value());
}

TEST(Resolve, ConditionalBindsLabelCount) {
  const ResolvedModel m = resolve(parsed(pair_spec("cgan", "cgan")), kMnist);
  ASSERT_TRUE(m.label_count.has_value());
  EXPECT_EQ(*m.label_count, 10u);
  EXPECT_EQ(m.process.kind, ProcessKind::conditional);
}

TEST(Resolve, RandomCustomSpecsSatisfyInvariants) {
  RngStream rng(2718);
  const char* acts[] = {"ReLU", "LeakyReLU", "Tanh", "Sigmoid", "ELU"};
  for (int trial = 0; trial < 25; ++trial) {
    const std::size_t d = 1 + rng.below(6);
    json gen = json::array(), disc = json::array();
    const std::size_t depth = 1 + rng.below(3);
    for (std::size_t i = 0; i < depth; ++i) {
      gen.push_back({{"kind", "Dense"}, {"params", {{"units", 1 + rng.below(12)}}}});
      gen.push_back(acts[rng.below(5)]);
      disc.push_back({{"kind", "Dense"}, {"params", {{"units", 1 + rng.below(12)}}}});
      disc.push_back(acts[rng.below(5)]);
    }
    gen.push_back({{"kind", "Dense"}, {"params", {{"units", d}}}});
    disc.push_back({{"kind", "Dense"}, {"params", {{"units", 1}}}});
    const json spec = {{"GAN_model", {{"latent_dim", 1 + rng.below(20)}}},
                       {"generator", {{"layers", gen}}},
                       {"discriminator", {{"layers", disc}}},
                       {"data_path", "x.idx"}};
    const ResolvedModel m = resolve(parsed(spec.dump()), {d});
    EXPECT_EQ(m.generator.output_shape(), Shape{d});
    EXPECT_EQ(m.discriminator.output_shape(), Shape{1});
    EXPECT_EQ(m.generator.input_shape(), Shape{m.latent_dim});
  }
}

TEST(Schema, IsJsonSchemaDocument) {
  const json s = json::parse(spec_schema_json());
  EXPECT_EQ(s["$schema"], "https://json-schema.org/draft/2020-12/schema");
  EXPECT_TRUE(s["properties"].contains("generator"));
  EXPECT_TRUE(s["properties"].contains("data_path"));
}

TEST(Diagnostics, JsonShape) {
  const json d = json::parse(diagnostics_json(check_spec("{}")));
  ASSERT_EQ(d.size(), 3u);
  for (const auto& x : d) {
    EXPECT_EQ(x["severity"], "error");
    EXPECT_TRUE(x.contains("path"));
    EXPECT_TRUE(x.contains("message"));
  }
}
