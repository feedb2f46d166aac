/** Browser bootstrap: pick the API base from ?api= or same origin. */

import { ApiClient } from "./api.js";
import { initApp } from "./app.js";

const base = new URLSearchParams(window.location.search).get("api") ?? window.location.origin;
const root = document.getElementById("app");
if (!root) throw new Error("missing #app container");
initApp(root, new ApiClient(base.replace(/\/$/, "")));
