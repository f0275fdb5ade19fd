fn main() {
    println!("tmdg: placeholder");
}
