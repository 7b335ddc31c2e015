// Placeholder main; the full CLI is implemented once the library settles.
int main() { return 0; }
