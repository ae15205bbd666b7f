#pragma once

#include <optional>
#include <string>
#include <vector>

namespace sast::cli {

// Exit codes: 0 success, 1 runtime failure, 2 invalid input.

struct TrainArgs {
  std::string config;
  std::string out_dir;
  int threads = 0;
};

struct EvalArgs {
  std::string config;
  std::string checkpoint;
  std::string out_dir;
  std::string split = "test";
  std::string mode = "both";  // surrogate | hard | both
  std::vector<double> corrupt;
  int threads = 0;
};

struct HwSimArgs {
  std::string config;
  std::string checkpoint;
  std::string out_dir;
  std::string profile = "loihi_like";
  std::optional<double> reference_ksynops;
  int threads = 0;
};

struct DiagnoseArgs {
  std::string config;
  std::string checkpoint;
  std::string out_dir;
  std::string what;  // gamma | lipschitz | margins | samband
  std::string split = "val";
  int threads = 0;
};

struct SweepArgs {
  std::string config;
  std::string out_dir;
  int threads = 0;
};

int cmd_train(const TrainArgs& args);
int cmd_eval(const EvalArgs& args);
int cmd_hwsim(const HwSimArgs& args);
int cmd_diagnose(const DiagnoseArgs& args);
int cmd_sweep(const SweepArgs& args);

/// Full argv interface (subcommands train / eval / corrupt-eval / hw-sim /
/// sweep-rho / diagnose).
int run(int argc, const char* const* argv);

}  // namespace sast::cli
