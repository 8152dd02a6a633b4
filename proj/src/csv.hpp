#ifndef IMLMM_CSV_HPP
#define IMLMM_CSV_HPP

#include "model.hpp"

#include <string>
#include <vector>

namespace imlmm {

/// Column mapping from a CSV file onto a Dataset.
struct CsvSchema {
  std::string response = "response";
  std::string group = "group";
  std::vector<std::string> covariates;         // fixed effects besides the intercept
  std::vector<std::string> random_covariates;  // empty -> random intercept
  bool intercept = true;
};

Dataset load_dataset(const std::string& path, const CsvSchema& schema = {});
Dataset parse_dataset(const std::string& text, const CsvSchema& schema = {});

}  // namespace imlmm

#endif
