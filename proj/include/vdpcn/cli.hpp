#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vdpcn/config.hpp"

namespace vdpcn::cli {

enum ExitCode : int
{
  ok = 0,
  failure = 1,
  missing_input = 2,
  usage = 64,
};

/// Shared flags, already merged with preset, config file and environment.
struct Context
{
  config::RunConfig config;
  std::filesystem::path out = "runs";
  int workers = 1;
  std::ostream *log = nullptr; ///< human-readable progress
  std::ostream *err = nullptr;

  std::filesystem::path data_root() const;
};

int cmd_gen_data(Context const &ctx);
int cmd_train_teacher(Context const &ctx);
int cmd_distill(Context const &ctx, std::filesystem::path const &teacher);
int cmd_eval(Context const &ctx, std::filesystem::path const &checkpoint);
int cmd_ablate(Context const &ctx, std::filesystem::path const &teacher);
int cmd_render(Context const &ctx, std::filesystem::path const &input, std::optional<std::filesystem::path> const &checkpoint);

/// Parses argv-style arguments (without the program name) and dispatches.
int run(
  std::vector<std::string> const &args, std::ostream &out, std::ostream &err,
  std::map<std::string, std::string> const &environment = config::process_environment());

/// Paths written below the output root.
namespace artifacts {
inline constexpr char const *manifest = "manifest.json";
inline constexpr char const *teacher_checkpoint = "teacher.ckpt";
inline constexpr char const *teacher_log = "teacher_log.jsonl";
inline constexpr char const *student_checkpoint = "student.ckpt";
inline constexpr char const *student_log = "student_log.jsonl";
inline constexpr char const *target_cache = "teacher_targets";
inline constexpr char const *resolved_config = "config.json";
} // namespace artifacts

} // namespace vdpcn::cli
