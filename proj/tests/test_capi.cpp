// Exercises the shared library through its C header only.
#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>

#include <unistd.h>

#include <httplib.h>
#include <json.hpp>

#include "authorgan/authorgan.h"

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const std::string kData = AUTHORGAN_TEST_DATA;

const std::string kSmallSpec = R"({
  "GAN_model": {"epochs": 1, "batch_size": 32, "seed": 4, "latent_dim": 8},
  "generator": {"layers": [{"kind": "Dense", "params": {"units": 784}}, "Tanh",
                           {"kind": "Reshape", "params": {"shape": [1, 28, 28]}}]},
  "discriminator": {"layers": ["Flatten", {"kind": "Dense", "params": {"units": 16}},
                               "LeakyReLU", {"kind": "Dense", "params": {"units": 1}}, "Sigmoid"]},
  "data_path": "mnist512.idx"
})";

std::string take(char* s) {
  std::string out = s ? s : "";
  ag_free(s);
  return out;
}

ag_spec* parse(const std::string& text, const char* base = kData.c_str()) {
  ag_spec* s = nullptr;
  EXPECT_EQ(ag_spec_parse(text.data(), text.size(), base, &s), AG_OK);
  return s;
}

}  // namespace

TEST(CApi, VersionAndStatusNames) {
  EXPECT_STREQ(ag_version(), "0.1.0");
  EXPECT_STREQ(ag_status_name(AG_OK), "ok");
  EXPECT_STRNE(ag_status_name(AG_ERR_VALIDATION), ag_status_name(AG_ERR_IO));
}

TEST(CApi, StaticDocuments) {
  EXPECT_EQ(json::parse(ag_palette_json()).size(), 31u);
  EXPECT_EQ(json::parse(ag_presets_json())["presets"].size(), 5u);
  EXPECT_TRUE(json::parse(ag_schema_json()).contains("properties"));
}

TEST(CApi, NullArgumentsAreArgumentErrors) {
  EXPECT_EQ(ag_spec_parse(nullptr, 0, nullptr, nullptr), AG_ERR_ARGUMENT);
  EXPECT_NE(std::strlen(ag_last_error()), 0u);
  char* out = nullptr;
  EXPECT_EQ(ag_spec_to_json(nullptr, &out), AG_ERR_ARGUMENT);
  EXPECT_EQ(ag_train(nullptr, nullptr, nullptr), AG_ERR_ARGUMENT);
  ag_spec_destroy(nullptr);
  ag_report_destroy(nullptr);
}

TEST(CApi, PaperConfigValidates) {
  ag_spec* s = nullptr;
  ASSERT_EQ(ag_spec_load_file((kData + "/paper_dcgan.json").c_str(), &s), AG_OK);
  EXPECT_EQ(ag_spec_error_count(s), 0u);
  EXPECT_EQ(json::parse(take([&] {
              char* o = nullptr;
              ag_spec_to_json(s, &o);
              return o;
            }()))["GAN_model"]["epochs"],
            50);
  ag_spec_destroy(s);
}

TEST(CApi, MissingFileIsIoError) {
  ag_spec* s = nullptr;
  EXPECT_EQ(ag_spec_load_file("/nonexistent/spec.json", &s), AG_ERR_IO);
  EXPECT_EQ(s, nullptr);
}

TEST(CApi, InvalidSpecKeepsDiagnostics) {
  ag_spec* s = parse("{}");
  ASSERT_NE(s, nullptr);
  EXPECT_EQ(ag_spec_error_count(s), 3u);
  char* d = nullptr;
  ASSERT_EQ(ag_spec_diagnostics_json(s, &d), AG_OK);
  EXPECT_EQ(json::parse(take(d)).size(), 3u);
  ag_train_options o;
  ag_train_options_init(&o);
  ag_report* r = nullptr;
  EXPECT_EQ(ag_train(s, &o, &r), AG_ERR_VALIDATION);
  EXPECT_EQ(r, nullptr);
  ag_spec_destroy(s);

  ag_spec* bad = parse("{ nope");
  char* out = nullptr;
  EXPECT_EQ(ag_spec_to_json(bad, &out), AG_ERR_VALIDATION);
  ag_spec_destroy(bad);
}

TEST(CApi, TrainWithCallbackAndReport) {
  ag_spec* s = parse(kSmallSpec);
  ag_train_options o;
  ag_train_options_init(&o);
  o.max_steps = 3;
  o.include_timing = 0;
  int calls = 0;
  o.user = &calls;
  o.on_step = [](void* user, const ag_step* st) -> int {
    ++*static_cast<int*>(user);
    return st->step < 0 ? 1 : 0;
  };
  ag_report* r = nullptr;
  ASSERT_EQ(ag_train(s, &o, &r), AG_OK) << ag_last_error();
  EXPECT_EQ(calls, 3);
  ASSERT_EQ(ag_report_step_count(r), 3u);
  ag_step st{};
  ASSERT_EQ(ag_report_step(r, 2, &st), AG_OK);
  EXPECT_EQ(st.step, 3);
  EXPECT_TRUE(std::isfinite(st.gen_loss));
  EXPECT_EQ(ag_report_step(r, 3, &st), AG_ERR_ARGUMENT);
  char* j = nullptr;
  ASSERT_EQ(ag_report_json(r, 0, &j), AG_OK);
  const json rep = json::parse(take(j));
  EXPECT_FALSE(rep.contains("timing"));
  EXPECT_EQ(rep["config"]["seed"], 4);

  // same seed, same numbers
  ag_report* r2 = nullptr;
  ASSERT_EQ(ag_train(s, &o, &r2), AG_OK);
  char* j2 = nullptr;
  ag_report_json(r2, 0, &j2);
  EXPECT_EQ(json::parse(take(j2)), rep);
  ag_report_destroy(r);
  ag_report_destroy(r2);
  ag_spec_destroy(s);
}

TEST(CApi, CallbackCancels) {
  ag_spec* s = parse(kSmallSpec);
  ag_train_options o;
  ag_train_options_init(&o);
  o.on_step = [](void*, const ag_step* st) { return st->step >= 2 ? 1 : 0; };
  ag_report* r = nullptr;
  EXPECT_EQ(ag_train(s, &o, &r), AG_ERR_CANCELLED);
  EXPECT_EQ(r, nullptr);
  ag_spec_destroy(s);
}

TEST(CApi, TrainWritesOutputs) {
  const fs::path out = fs::temp_directory_path() / ("authorgan_capi_" + std::to_string(::getpid()));
  ag_spec* s = parse(kSmallSpec);
  ag_train_options o;
  ag_train_options_init(&o);
  o.max_steps = 1;
  o.samples = 4;
  o.has_seed = 1;
  o.seed = 11;
  const std::string dir = out.string();
  o.out_dir = dir.c_str();
  ag_report* r = nullptr;
  ASSERT_EQ(ag_train(s, &o, &r), AG_OK) << ag_last_error();
  EXPECT_TRUE(fs::exists(out / "report.json"));
  EXPECT_TRUE(fs::exists(out / "generator.agp"));
  EXPECT_TRUE(fs::exists(out / "samples.pgm"));
  EXPECT_EQ(json::parse(std::ifstream(out / "report.json"))["config"]["seed"], 11);
  ag_report_destroy(r);
  ag_spec_destroy(s);
  fs::remove_all(out);
}

TEST(CApi, MissingDataIsIoError) {
  ag_spec* s = parse(kSmallSpec, "/nonexistent");
  ag_train_options o;
  ag_train_options_init(&o);
  ag_report* r = nullptr;
  EXPECT_EQ(ag_train(s, &o, &r), AG_ERR_IO);
  ag_spec_destroy(s);
}

TEST(CApi, MatrixSubset) {
  const std::string data = kData + "/mnist512.idx";
  ag_matrix_options o;
  ag_matrix_options_init(&o);
  EXPECT_EQ(o.epochs, 1);
  EXPECT_EQ(o.batch_size, 64);
  o.data_path = data.c_str();
  o.generators = "gan";
  o.discriminators = "gan,wgan";
  o.limit = 64;
  o.latent_dim = 16;
  int rows = 0;
  o.user = &rows;
  o.on_row = [](void* user, const char* row) {
    ++*static_cast<int*>(user);
    EXPECT_TRUE(json::parse(row).contains("final_gen_loss"));
  };
  ag_matrix* m = nullptr;
  ASSERT_EQ(ag_matrix_run(&o, &m), AG_OK) << ag_last_error();
  EXPECT_EQ(rows, 2);
  EXPECT_EQ(ag_matrix_row_count(m), 2u);
  char* csv = nullptr;
  ASSERT_EQ(ag_matrix_csv(m, &csv), AG_OK);
  const std::string c = take(csv);
  EXPECT_NE(c.find("\ngan,wgan,"), std::string::npos);
  ag_matrix_destroy(m);

  o.generators = "notagan";
  EXPECT_EQ(ag_matrix_run(&o, &m), AG_ERR_REGISTRY);
}

TEST(CApi, ServerServesPalette) {
  ag_server_config c;
  ag_server_config_init(&c);
  c.port = 0;
  c.data_dir = kData.c_str();
  ag_server* srv = nullptr;
  ASSERT_EQ(ag_server_create(&c, &srv), AG_OK);
  int port = 0;
  ASSERT_EQ(ag_server_start(srv, &port), AG_OK) << ag_last_error();
  EXPECT_GT(port, 0);
  httplib::Client client("127.0.0.1", port);
  auto r = client.Get("/palette");
  ASSERT_TRUE(r);
  EXPECT_EQ(json::parse(r->body).size(), 31u);
  EXPECT_EQ(ag_server_stop(srv), AG_OK);
  ag_server_destroy(srv);
}
