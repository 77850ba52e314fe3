#include <iostream>

int main() {
  std::cout << "hamspec CLI placeholder\n";
  return 0;
}
