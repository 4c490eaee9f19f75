// Minimal simulator for the line protocol: reads comma-separated inputs on
// stdin, answers one value per line.
//
//   line_simulator sum [shift]     y = x_1 + ... + x_d + shift
//   line_simulator m1|m2|m3|m4 [shift]
//   line_simulator garbage         answers "nan?" (protocol violation)
#include <updens/test_functions.hpp>

#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

int main(int argc, char** argv)
{
  const std::string mode = argc > 1 ? argv[1] : "sum";
  const double shift = argc > 2 ? std::stod(argv[2]) : 0.0;
  const auto fn = updens::parse_test_function(mode);
  std::cout << "# line_simulator " << mode << std::endl;
  std::string line;
  while (std::getline(std::cin, line)) {
    if (mode == "garbage") {
      std::cout << "nan?" << std::endl;
      continue;
    }
    std::vector<double> x;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) x.push_back(std::stod(field));
    double y = shift;
    if (fn) {
      y += updens::eval_test_function(*fn, x);
    } else {
      for (double v : x) y += v;
    }
    std::cout << std::setprecision(17) << y << std::endl;
  }
  return 0;
}
