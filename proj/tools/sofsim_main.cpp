#include <iostream>

int main() {
  std::cout << "sofsim: placeholder\n";
  return 0;
}
