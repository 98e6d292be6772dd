#include "doctest.h"
#include "metalgan/config.hpp"
#include "support.hpp"

using namespace metalgan;

namespace {

RunConfig parsed(const std::string& text) {
  RunConfig c;
  apply_config_text(c, text);
  return c;
}

}  // namespace

TEST_CASE("config echo reproduces the config") {
  RunConfig c;
  c.mode = "train";
  c.seed = 42;
  c.data_dir = "/data/x";
  c.out_dir = "out dir";
  c.train_domains = {"black_hair", "not_smiling"};
  c.train.lambda_ml = 1.0 / 3.0;
  c.train.inner.weights.dom = 0;
  c.infer.inner.weights.adv = 7.25;
  c.model.generator.skip_connections = false;
  c.finetune = false;
  c.embedder = "raw_pixels";
  const auto echo = format_config(c);
  const auto back = parsed(echo);
  CHECK(format_config(back) == echo);
  CHECK(back.train.lambda_ml == c.train.lambda_ml);
  CHECK(back.train_domains == c.train_domains);
  CHECK(back.out_dir == c.out_dir);
  CHECK(back.model == c.model);
  CHECK(back.infer.inner.weights == c.infer.inner.weights);
  CHECK_FALSE(back.finetune);
}

TEST_CASE("config keys use the hyper-parameter symbols") {
  const auto c = parsed(
      "N_epochs = 7\nlambda_ml = 0.5 # trailing comment\n# full comment\n\nlambda_G=0.002\nT = 0.8\nt = 0.1\n"
      "w_dom = 0\ninf.w_dom = 3\nN_inf_test = 0\nfew_shot = 12\n");
  CHECK(c.train.n_epochs == 7);
  CHECK(c.train.lambda_ml == 0.5);
  CHECK(c.train.inner.lambda_g == 0.002);
  CHECK(c.train.inner.gate_high == 0.8);
  CHECK(c.train.inner.gate_low == 0.1);
  CHECK(c.train.inner.weights.dom == 0);
  CHECK(c.infer.inner.weights.dom == 3);
  CHECK(c.infer.n_inf_test == 0);
  CHECK(c.infer.few_shot == 12);
}

TEST_CASE("bad config lines are reported with their location") {
  RunConfig c;
  try {
    apply_config_text(c, "seed = 1\nepochs = 3\n", "run.cfg");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("run.cfg:2") != std::string::npos);
    CHECK(msg.find("epochs") != std::string::npos);
  }
  CHECK_THROWS_AS(apply_config_text(c, "seed 1\n"), ConfigError);
  CHECK_THROWS_AS(apply_config_text(c, "seed = -1\n"), ConfigError);
  CHECK_THROWS_AS(apply_config_text(c, "lambda_ml = fast\n"), ConfigError);
  CHECK_THROWS_AS(apply_config_text(c, "finetune = maybe\n"), ConfigError);
  CHECK_THROWS_AS(apply_config_file(c, "/nonexistent/metalgan.cfg"), IoError);
}

TEST_CASE("mode-specific validation") {
  RunConfig c;
  c.mode = "train";
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.out_dir = "o";
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.data_dir = "d";
  c.validate();
  c.unseen_domains.push_back("mustache");
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.mode = "infer";
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.checkpoint = "c.bin";
  c.validate();
  c.mode = "eval";
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.mode = "fly";
  CHECK_THROWS_AS(c.validate(), ConfigError);
  RunConfig s;
  s.mode = "synth";
  s.out_dir = "o";
  s.validate();
  s.image_size = 8;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  RunConfig g;
  g.mode = "train";
  g.out_dir = "o";
  g.data_dir = "d";
  g.train.inner.gate_low = 0.95;
  CHECK_THROWS_AS(g.validate(), ConfigError);
}

TEST_CASE("desk preset") {
  const RunConfig c;
  CHECK(c.train_domains == std::vector<std::string>{"black_hair", "blond_hair", "eyeglasses", "pale_skin", "mustache"});
  CHECK(c.unseen_domains == std::vector<std::string>{"gray_hair", "bushy_eyebrows", "smiling"});
  CHECK(c.image_size == 32);
  CHECK(c.count == 5000);
  CHECK(c.train.n_epochs == 2000);
  CHECK(c.train.n_meta_iter == 20);
  CHECK(c.train.inner.batch_size == 8);
}

TEST_CASE("split_list trims and drops empty items") {
  CHECK(split_list(" a, b ,,c ") == std::vector<std::string>{"a", "b", "c"});
  CHECK(split_list("").empty());
}
