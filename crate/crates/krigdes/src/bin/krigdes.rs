fn main() {
    // CLI wired up once the task layer exists.
}
