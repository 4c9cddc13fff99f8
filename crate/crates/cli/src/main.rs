fn main() {
    println!("levy-spde");
}
