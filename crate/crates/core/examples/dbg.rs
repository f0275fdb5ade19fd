fn main() {
    let m = tmdg::mesh::build_structured(2, [0.0, 0.0], 1.0).unwrap();
    let r = tmdg::mesh::bisect(&m, &[5]).unwrap();
    println!("elements {} -> {}", m.n_elements(), r.mesh.n_elements());
    match tmdg::mesh::verify_conformity(&r.mesh) {
        Ok(()) => println!("conforming"),
        Err(e) => {
            println!("VIOLATION: {e}");
            for (i, el) in r.mesh.elements.iter().enumerate() {
                let vs = el.v.map(|v| r.mesh.vertices[v]);
                println!("{i}: {:?} verts {:?} ref_edge {}", el.v, vs, el.refine_edge);
            }
        }
    }
}
