#include <cstdio>

int main() {
  std::puts("atd: placeholder");
  return 0;
}
