import { Workbench } from "./workbench.js";

const root = document.getElementById("app");
if (!root) throw new Error("missing #app mount point");
new Workbench(root);
