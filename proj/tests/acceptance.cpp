#include <hydla/hydla.hpp>
#include <cstdio>
int main() { std::puts("stub"); return 0; }
