#include <CLI11.hpp>
#include <chrono>
#include <cstdio>
#include <functional>
#include <set>

#include "acceptance.hpp"

int main(int argc, char** argv) {
  CLI::App app{"metalgan acceptance checks"};
  std::string work;
  std::vector<int> only;
  app.add_option("--work", work, "Directory for desk-scale artifacts")->required();
  app.add_option("--only", only, "Run only these criteria")->check(CLI::Range(1, 8));
  CLI11_PARSE(app, argc, argv);

  acceptance::Desk desk(std::filesystem::absolute(work).lexically_normal());
  const std::vector<std::pair<std::string, std::function<acceptance::Outcome()>>> criteria{
      {"reptile identity", [&] { return acceptance::reptile_identity(desk); }},
      {"inner-loop gating", [&] { return acceptance::gating_soundness(desk); }},
      {"loss gradients", [] { return acceptance::gradient_check(); }},
      {"metric unit cases", [] { return acceptance::metric_unit_cases(); }},
      {"desk transfer", [&] { return acceptance::desk_transfer(desk); }},
      {"unseen fine-tuning", [&] { return acceptance::unseen_finetune(desk); }},
      {"domain loss ablation", [&] { return acceptance::domain_loss_ablation(desk); }},
      {"determinism", [&] { return acceptance::determinism(desk); }},
  };
  const std::set<int> selected(only.begin(), only.end());
  bool all = true;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!selected.empty() && !selected.contains(id)) continue;
    const auto start = std::chrono::steady_clock::now();
    acceptance::Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("criterion %d %s: %s (%s; %.0f s)\n", id, criteria[i].first.c_str(), o.pass ? "PASS" : "FAIL",
                o.detail.c_str(), s);
    std::fflush(stdout);
    all = all && o.pass;
  }
  return all ? 0 : 1;
}
