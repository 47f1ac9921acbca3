import { App } from './app';

const app = new App(document.getElementById('app') as HTMLElement);
void app.init();

// handy for poking at the state from the devtools console
(window as unknown as { radkitApp: App }).radkitApp = app;
