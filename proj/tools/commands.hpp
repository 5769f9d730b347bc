#pragma once

#include <string>

#include "dewp/config.hpp"

namespace dewp::cli {

void cmd_preprocess(const std::string& csv_path, const std::string& out_path, RunConfig config);
void cmd_train(const std::string& bundle_path, const std::string& checkpoint_path,
               const std::string& report_path, RunConfig config);
void cmd_evaluate(const std::string& bundle_path, const std::string& checkpoint_path,
                  const std::string& out_path, RunConfig config);
void cmd_predict(const std::string& checkpoint_path, const std::string& csv_path,
                 const std::string& origin, const std::string& out_path, RunConfig config);
void cmd_sweep(const std::string& bundle_path, const std::string& out_dir, RunConfig config);

}  // namespace dewp::cli
