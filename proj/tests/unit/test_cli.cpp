#include <sys/wait.h>

#include <cstdlib>
#include <nlohmann/json.hpp>

#include "doctest.h"
#include "metalgan/checkpoint.hpp"
#include "support.hpp"

namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string err;
};

Run cli(const std::string& args, const fs::path& scratch) {
  const auto err_path = scratch / "stderr.txt";
  const std::string cmd = std::string("'") + METALGAN_CLI_PATH + "' " + args + " 2>'" + err_path.string() + "' >/dev/null";
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, support::read_file(err_path)};
}

std::size_t count_files(const fs::path& dir, const std::string& ext) {
  std::size_t n = 0;
  for (const auto& e : fs::directory_iterator(dir)) n += e.path().extension() == ext;
  return n;
}

std::size_t count_lines(const fs::path& path) {
  const auto text = support::read_file(path);
  return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
}

// Keeps end-to-end CLI runs to a few seconds.
const std::string kTiny =
    " --set g_base_channels=4 --set g_n_downsample=1 --set g_n_residual=1 --set d_base_channels=4 --set d_n_layers=2"
    " --set batch_size=4 --set N_meta_iter=3 --set inf.batch_size=4 --set N_inf_epochs=1 --set N_inf_train=2"
    " --set N_inf_test=2 --set few_shot=10 --set eval_inputs=60";

}  // namespace

TEST_CASE("usage errors exit with 2") {
  support::TempDir dir;
  CHECK(cli("synth --count 5", dir.path()).code == 2);
  CHECK(cli("", dir.path()).code == 2);
  CHECK(cli("train --data x --out y --bogus", dir.path()).code == 2);
  CHECK(cli("train --data x --out y --set nonsense=1", dir.path()).code == 2);
  CHECK(cli("train --data x --out y --set w_dom", dir.path()).code == 2);
  CHECK(cli("infer --data x --out y", dir.path()).code == 2);
  CHECK(cli("--help", dir.path()).code == 0);
}

TEST_CASE("runtime failures exit with 1") {
  support::TempDir dir;
  const auto r = cli("train --data '" + (dir / "missing").string() + "' --out '" + (dir / "o").string() + "'", dir.path());
  CHECK(r.code == 1);
  CHECK(r.err.find("missing") != std::string::npos);
}

TEST_CASE("end-to-end commands") {
  support::TempDir dir;
  const auto data = dir / "data";
  const auto q = [](const fs::path& p) { return "'" + p.string() + "'"; };

  REQUIRE(cli("synth --count 1200 --image-size 16 --seed 7 --out " + q(data), dir.path()).code == 0);
  CHECK(count_files(data / "images", ".png") == 1200);
  CHECK(fs::exists(data / "attributes.txt"));
  const auto manifest_hash = metalgan::file_hash(data / "manifest.json");
  REQUIRE(cli("synth --count 1200 --image-size 16 --seed 7 --out " + q(dir / "data2"), dir.path()).code == 0);
  CHECK(metalgan::file_hash(dir / "data2/manifest.json") == manifest_hash);
  CHECK(metalgan::file_hash(dir / "data2/attributes.txt") == metalgan::file_hash(data / "attributes.txt"));

  const auto bad = cli("train --epochs 1 --data " + q(data) + " --out " + q(dir / "bad") +
                           " --train-domains hats" + kTiny,
                       dir.path());
  CHECK(bad.code == 1);
  CHECK(bad.err.find("eyeglasses") != std::string::npos);

  const auto train = dir / "train";
  REQUIRE(cli("train --epochs 2 --seed 1 --data " + q(data) + " --out " + q(train) + kTiny, dir.path()).code == 0);
  CHECK(fs::exists(train / "checkpoint.bin"));
  CHECK(count_lines(train / "train_log.csv") == 1 + 2 * 3);
  CHECK(fs::exists(train / "train_config.txt"));

  // The config echo alone reproduces the run.
  REQUIRE(cli("train --config " + q(train / "train_config.txt") + " --out " + q(dir / "train_again"), dir.path()).code == 0);
  CHECK(support::read_file(dir / "train_again/checkpoint.bin") == support::read_file(train / "checkpoint.bin"));

  CHECK(cli("train --epochs 1 --w_dom 0 --data " + q(data) + " --out " + q(dir / "nodom") + kTiny, dir.path()).code == 0);

  const auto ck = train / "checkpoint.bin";
  const auto before = metalgan::file_hash(ck);
  const auto gen = dir / "gen";
  const auto infer = cli("infer --unseen mustache,gray_hair --checkpoint " + q(ck) + " --data " + q(data) + " --out " +
                             q(gen) + kTiny,
                         dir.path());
  REQUIRE(infer.code == 0);
  CHECK(infer.err.find("warning") != std::string::npos);
  CHECK(fs::is_directory(gen / "mustache"));
  CHECK(fs::is_directory(gen / "gray_hair"));
  CHECK(fs::exists(gen / "finetuned_checkpoint.bin"));
  CHECK(metalgan::file_hash(ck) == before);

  const auto noft = dir / "noft";
  REQUIRE(cli("infer --no-finetune --unseen smiling --checkpoint " + q(ck) + " --data " + q(data) + " --out " +
                  q(noft) + kTiny,
              dir.path())
              .code == 0);
  CHECK_FALSE(fs::exists(noft / "finetuned_checkpoint.bin"));
  CHECK(metalgan::file_hash(ck) == before);
  const auto manifest = nlohmann::json::parse(support::read_file(noft / "generation_manifest.json"));
  CHECK(manifest["checkpoint_hash"] == before);
  CHECK(manifest["finetuned"] == false);

  const auto eval = dir / "eval";
  const auto evaluated = cli("eval --embedder raw_pixels --gen " + q(gen) + " --data " + q(data) + " --out " + q(eval) +
                                 " --set fid_samples=60 --set prd_clusters=5",
                             dir.path());
  INFO(evaluated.err);
  REQUIRE(evaluated.code == 0);
  CHECK(count_lines(eval / "metrics.csv") == 3);
  CHECK(fs::exists(eval / "fid_bar.png"));
  CHECK(fs::exists(eval / "prd_mustache.png"));
}
