import { CoordinatorClient } from "./api";
import { DashboardModel } from "./model";
import { PollLoop } from "./poller";
import { DashboardView } from "./view";

const root = document.getElementById("app");
if (!root) throw new Error("missing #app mount point");

const client = new CoordinatorClient("");
const model = new DashboardModel();
const view = new DashboardView(root, model, client);
const loop = new PollLoop(model, client, () => Date.now(), () => view.render());
loop.start();
